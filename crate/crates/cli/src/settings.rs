//! Flag and config-file resolution. Every flag has a config key of the same
//! name (dashes become underscores); a flag given on the command line wins.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use serde::{Deserialize, Serialize};

use harnessjudge::corpus::{BuggyMode, DEFAULT_DECONTAMINATION_THRESHOLD};
use harnessjudge::{ExecLimits, JudgeConfig, RuntimeConfig};
use harnessjudge_gateway::SamplingConfig;

use crate::error::{CliError, ResultExt};

/// Contents of a `--config` TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub parallelism: Option<usize>,
    pub seed: Option<u64>,
    pub first_k: Option<usize>,
    pub replay: Option<u32>,
    pub max_inputs: Option<usize>,
    pub max_generators: Option<u32>,
    pub timeout: Option<f64>,
    pub check_timeout: Option<f64>,
    pub by_difficulty: Option<bool>,
    pub policy: Option<BuggyMode>,
    pub keep_top: Option<usize>,
    pub threshold: Option<f64>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub n_samples: Option<usize>,
    pub temperature: Option<f64>,
    pub presence_penalty: Option<f64>,
    pub max_tokens: Option<u32>,
    pub retry: Option<u32>,
    pub requests_per_second: Option<f64>,
    pub api_key_env: Option<String>,
    pub program_command: Option<Vec<String>>,
    pub shim_command: Option<Vec<String>>,
    pub scratch_root: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_validation(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_validation(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML file whose keys mirror the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker count; defaults to the number of logical cores.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct JudgeArgs {
    /// Judge only the first K collected inputs of each response.
    #[arg(long)]
    pub first_k: Option<usize>,
    /// Run every generator this many times with fresh seeds.
    #[arg(long)]
    pub replay: Option<u32>,
    #[arg(long)]
    pub max_inputs: Option<usize>,
    #[arg(long)]
    pub max_generators: Option<u32>,
    /// Wall-clock limit per program run, in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Wall-clock limit per check_output call, in seconds.
    #[arg(long)]
    pub check_timeout: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Chat-completions base URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Append every exchange to this transcript file.
    #[arg(long, conflicts_with = "replay_transcript")]
    pub record: Option<PathBuf>,
    /// Answer from this transcript file instead of the network.
    #[arg(long)]
    pub replay_transcript: Option<PathBuf>,
}

fn seconds(value: f64, what: &str) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(value)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| CliError::validation(format!("{what} must be a positive number of seconds")))
}

/// Resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct Settings {
    pub file: FileConfig,
    pub common: CommonArgs,
}

impl Settings {
    pub fn load(common: &CommonArgs) -> Result<Self, CliError> {
        Ok(Self {
            file: FileConfig::load(common.config.as_deref())?,
            common: common.clone(),
        })
    }

    pub fn parallelism(&self) -> usize {
        self.common
            .parallelism
            .or(self.file.parallelism)
            .unwrap_or_else(harnessjudge::par::default_parallelism)
            .max(1)
    }

    pub fn seed(&self) -> u64 {
        self.common.seed.or(self.file.seed).unwrap_or(0)
    }

    pub fn runtime(&self) -> Result<RuntimeConfig, CliError> {
        let mut rt = RuntimeConfig::from_env();
        if let Some(cmd) = &self.file.program_command {
            rt.program_command = cmd.clone();
        }
        if let Some(cmd) = &self.file.shim_command {
            rt.shim_command = cmd.clone();
        }
        if let Some(root) = &self.file.scratch_root {
            rt.scratch_root = Some(root.clone());
        }
        rt.validate().validation()?;
        Ok(rt)
    }

    pub fn judge_config(&self, args: &JudgeArgs) -> Result<JudgeConfig, CliError> {
        let f = &self.file;
        let mut cfg = JudgeConfig {
            seed_base: self.seed(),
            ..JudgeConfig::default()
        };
        cfg.first_k = args.first_k.or(f.first_k);
        if let Some(v) = args.replay.or(f.replay) {
            cfg.replay_runs = v;
        }
        if let Some(v) = args.max_inputs.or(f.max_inputs) {
            cfg.max_inputs = v;
        }
        if let Some(v) = args.max_generators.or(f.max_generators) {
            cfg.max_generators = v;
        }
        if let Some(v) = args.timeout.or(f.timeout) {
            cfg.limits = cfg.limits.with_wall_time(seconds(v, "timeout")?);
        }
        if let Some(v) = args.check_timeout.or(f.check_timeout) {
            cfg.check_limits =
                ExecLimits::check_default().with_wall_time(seconds(v, "check_timeout")?);
        }
        cfg.validate().validation()?;
        Ok(cfg)
    }

    pub fn by_difficulty(&self, flag: bool) -> bool {
        flag || self.file.by_difficulty.unwrap_or(false)
    }

    pub fn policy(&self, flag: Option<BuggyMode>) -> BuggyMode {
        flag.or(self.file.policy).unwrap_or_default()
    }

    pub fn keep_top(&self, flag: Option<usize>) -> usize {
        flag.or(self.file.keep_top).unwrap_or(2)
    }

    pub fn threshold(&self, flag: Option<f64>) -> f64 {
        flag.or(self.file.threshold)
            .unwrap_or(DEFAULT_DECONTAMINATION_THRESHOLD)
    }

    pub fn sampling(&self, args: &ModelArgs) -> Result<SamplingConfig, CliError> {
        let f = &self.file;
        let mut cfg = SamplingConfig::default();
        if let Some(v) = args.endpoint.clone().or_else(|| f.endpoint.clone()) {
            cfg.endpoint_url = v;
        }
        cfg.model_name = args
            .model
            .clone()
            .or_else(|| f.model.clone())
            .ok_or_else(|| CliError::validation("--model is required"))?;
        if let Some(v) = args.n_samples.or(f.n_samples) {
            cfg.n_samples = v;
        }
        if let Some(v) = args.temperature.or(f.temperature) {
            cfg.temperature = v;
        }
        if let Some(v) = f.presence_penalty {
            cfg.presence_penalty = v;
        }
        if let Some(v) = f.max_tokens {
            cfg.max_tokens = v;
        }
        if let Some(v) = f.retry {
            cfg.retry = v;
        }
        if let Some(v) = f.timeout {
            cfg.timeout = seconds(v, "timeout")?;
        }
        cfg.max_requests_per_second = f.requests_per_second;
        if let Some(v) = &f.api_key_env {
            cfg.api_key_env = v.clone();
        }
        cfg.validate().validation()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(file: &str, common: CommonArgs) -> Settings {
        Settings {
            file: toml::from_str(file).unwrap(),
            common,
        }
    }

    fn no_flags() -> CommonArgs {
        CommonArgs {
            config: None,
            parallelism: None,
            seed: None,
        }
    }

    #[test]
    fn flags_win_over_file() {
        let s = settings(
            "seed = 5\nparallelism = 3\nfirst_k = 2\nreplay = 4",
            CommonArgs {
                seed: Some(9),
                ..no_flags()
            },
        );
        assert_eq!(s.seed(), 9);
        assert_eq!(s.parallelism(), 3);
        let cfg = s
            .judge_config(&JudgeArgs {
                first_k: Some(7),
                ..JudgeArgs::default()
            })
            .unwrap();
        assert_eq!(cfg.first_k, Some(7));
        assert_eq!(cfg.replay_runs, 4);
        assert_eq!(cfg.seed_base, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("frist_k = 1").is_err());
    }

    #[test]
    fn invalid_values_are_validation_errors() {
        let s = settings("first_k = 0", no_flags());
        assert_eq!(s.judge_config(&JudgeArgs::default()).unwrap_err().code, 2);
        let s = settings("timeout = -1.0", no_flags());
        assert_eq!(s.judge_config(&JudgeArgs::default()).unwrap_err().code, 2);
    }

    #[test]
    fn policy_and_sampling_from_file() {
        let s = settings(
            "policy = \"demo_passing\"\nmodel = \"m\"\ntemperature = 0.2",
            no_flags(),
        );
        assert_eq!(s.policy(None), BuggyMode::DemoPassing);
        let cfg = s.sampling(&ModelArgs::default()).unwrap();
        assert_eq!(cfg.model_name, "m");
        assert_eq!(cfg.temperature, 0.2);
        assert_eq!(cfg.presence_penalty, 1.5);
        assert!(settings("", no_flags())
            .sampling(&ModelArgs::default())
            .is_err());
    }
}
