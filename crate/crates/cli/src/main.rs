mod commands;
mod error;
mod io;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use harnessjudge::corpus::BuggyMode;
use harnessjudge::ResponseKind;

use crate::settings::{CommonArgs, JudgeArgs, ModelArgs};

/// Execute and score generated test harnesses and input-output tests.
#[derive(Debug, Parser)]
#[command(name = "harnessjudge", version)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Harness,
    IoPairs,
}

impl From<KindArg> for ResponseKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Harness => ResponseKind::Harness,
            KindArg::IoPairs => ResponseKind::IoPairs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// At least one official test passed, but not all.
    PartialOfficial,
    /// Every demo test passed and at least one official test failed.
    DemoPassing,
}

impl From<PolicyArg> for BuggyMode {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::PartialOfficial => BuggyMode::PartialOfficial,
            PolicyArg::DemoPassing => BuggyMode::DemoPassing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    /// Vary how many leading inputs are judged.
    FirstK,
    /// Vary how many times generators are replayed.
    Scaling,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Judge responses against their target and ground-truth programs.
    Judge {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Aggregate GI / ITR / TBR over judged records.
    Eval {
        #[arg(long)]
        records: PathBuf,
        /// Group rows by difficulty bucket; needs --corpus.
        #[arg(long)]
        by_difficulty: bool,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Also write the reports as JSONL here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pick the candidate program passing the most pooled generated tests.
    Select {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Diversity of generated inputs, optionally against a second response set.
    Diversity {
        #[arg(long)]
        responses: PathBuf,
        /// Second response set; both pools are downsampled to equal size per problem.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Seed for downsampling; defaults to --seed.
        #[arg(long)]
        downsample_seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Metrics as a function of first-k truncation or generator replays.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Ascending values of k or replay counts.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Dataset construction steps.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Sample responses from a model for every buggy program in a corpus.
    Gen {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Label the input and output strategies of harness responses.
    Classify {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Keep problems whose ground truth passes every official test.
    FilterGt {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Turn the best partially correct candidates into buggy programs.
    PickBuggy {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        #[arg(long)]
        keep_top: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Drop training problems that overlap evaluation problems.
    Decontaminate {
        #[arg(long)]
        corpus: PathBuf,
        /// Evaluation corpus to compare against.
        #[arg(long)]
        eval: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Keep responses whose record shows g passing and f failing.
    SftFilter {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Add example-free copies of functional problems.
    Variants {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
