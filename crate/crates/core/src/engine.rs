//! Judging one response against a (buggy, ground-truth) program pair.
//!
//! For every collected input both programs run; their normalized outputs are
//! compared for divergence, and each output is checked either by the
//! harness's `check_output` or, for input-output responses, by comparison
//! with the expected output. All inputs are evaluated, no short-circuiting.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::exec::{ExecLimits, Executor};
use crate::metrics::{compute_reward, RewardConfig};
use crate::model::{
    CheckStatus, CheckVerdict, InputEvaluation, InputSource, IoMode, JudgeRecord, Problem,
    ProgramSource, ResponseKind, TestResponse,
};
use crate::par;
use crate::runner::HarnessRunner;

pub const DEFAULT_MAX_INPUTS: usize = 20;
pub const DEFAULT_MAX_GENERATORS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub max_inputs: usize,
    /// Only the first `k` collected inputs are judged.
    pub first_k: Option<usize>,
    /// How many times every generator is re-run with a fresh seed.
    pub replay_runs: u32,
    /// Limits for each target-program run (and each generator call).
    pub limits: ExecLimits,
    /// Limits for each `check_output` call.
    pub check_limits: ExecLimits,
    pub seed_base: u64,
    /// Highest `generate_input_<i>` index that is called.
    pub max_generators: u32,
    pub reward: RewardConfig,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            max_inputs: DEFAULT_MAX_INPUTS,
            first_k: None,
            replay_runs: 1,
            limits: ExecLimits::default(),
            check_limits: ExecLimits::check_default(),
            seed_base: 0,
            max_generators: DEFAULT_MAX_GENERATORS,
            reward: RewardConfig::default(),
        }
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_inputs == 0 {
            return Err(ConfigError::Invalid("max_inputs must be >= 1".into()));
        }
        if self.first_k == Some(0) {
            return Err(ConfigError::Invalid("first_k must be >= 1".into()));
        }
        if self.replay_runs == 0 {
            return Err(ConfigError::Invalid("replay_runs must be >= 1".into()));
        }
        self.limits.validate()?;
        self.check_limits.validate()?;
        self.reward.validate()
    }

    /// Number of inputs that survive truncation and capping.
    pub fn input_budget(&self) -> usize {
        self.first_k
            .map_or(self.max_inputs, |k| k.min(self.max_inputs))
    }
}

/// Seed for generator `index` on replay round `replay` (both 1-based).
pub fn generator_seed(seed_base: u64, replay: u32, index: u32) -> u64 {
    seed_base
        .wrapping_add(u64::from(replay) * 1000)
        .wrapping_add(u64::from(index))
}

/// Ascending indices of the `generate_input_<i>` functions defined in `code`.
pub fn generator_indices(code: &str) -> Vec<u32> {
    static DEF: OnceLock<Regex> = OnceLock::new();
    let re = DEF.get_or_init(|| Regex::new(r"(?m)^\s*def\s+generate_input_(\d+)\s*\(").unwrap());
    let set: BTreeSet<u32> = re
        .captures_iter(code)
        .filter_map(|c| c[1].parse().ok())
        .collect();
    set.into_iter().collect()
}

/// Canonical form used for every output comparison: `\r\n` and `\r` become
/// `\n`, trailing whitespace is stripped per line, trailing blank lines dropped.
pub fn normalize_output(raw: &str) -> String {
    let unified = raw.replace("\r\n", "\n").replace('\r', "\n");
    let mut lines: Vec<&str> = unified.split('\n').map(str::trim_end).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

/// Verdict for an input-output pair.
pub fn check_expected(output: &str, expected: &str) -> CheckVerdict {
    let got = normalize_output(output);
    let want = normalize_output(expected);
    if got == want {
        CheckVerdict::pass()
    } else {
        CheckVerdict::failed(
            CheckStatus::AssertionFail,
            format!("expected {:?}, got {:?}", clip(&want), clip(&got)),
        )
    }
}

fn clip(s: &str) -> String {
    const MAX: usize = 200;
    match s.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollectedInputs {
    pub inputs: Vec<(String, InputSource)>,
    pub generator_errors: Vec<String>,
}

/// One response to judge and the programs it is judged against.
#[derive(Debug, Clone, Copy)]
pub struct JudgeJob<'a> {
    pub response: &'a TestResponse,
    pub problem: &'a Problem,
    pub f: &'a ProgramSource,
    pub g: &'a ProgramSource,
}

/// Executes responses against programs. Safe to share across threads.
pub struct Judge {
    executor: Executor,
    runner: Box<dyn HarnessRunner>,
}

impl Judge {
    pub fn new(executor: Executor, runner: Box<dyn HarnessRunner>) -> Self {
        Self { executor, runner }
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    pub fn runner(&self) -> &dyn HarnessRunner {
        self.runner.as_ref()
    }

    /// Inputs to judge, in order, after truncation to `first_k` and the cap.
    ///
    /// Harness inputs come from replay rounds 1..=replay_runs, and within a
    /// round from each generator in ascending index order. Duplicates are kept.
    pub fn collect_inputs(&self, response: &TestResponse, config: &JudgeConfig) -> CollectedInputs {
        let budget = config.input_budget();
        let mut out = CollectedInputs::default();
        if let Some(err) = &response.parse_error {
            out.generator_errors
                .push(format!("unparsed response: {err}"));
            return out;
        }
        match response.kind {
            ResponseKind::IoPairs => {
                let pairs = response.io_pairs.as_deref().unwrap_or_default();
                out.inputs = pairs
                    .iter()
                    .enumerate()
                    .take(budget)
                    .map(|(index, p)| (p.input_str.clone(), InputSource::HardcodedPair { index }))
                    .collect();
            }
            ResponseKind::Harness => {
                let code = response.harness_code.as_deref().unwrap_or_default();
                let mut indices = generator_indices(code);
                if indices.is_empty() {
                    out.generator_errors
                        .push("no generate_input functions defined".into());
                }
                indices.retain(|&i| {
                    let ok = (1..=config.max_generators).contains(&i);
                    if !ok {
                        out.generator_errors.push(format!(
                            "generate_input_{i}: index outside 1..={}",
                            config.max_generators
                        ));
                    }
                    ok
                });
                'replays: for replay in 1..=config.replay_runs {
                    for &index in &indices {
                        if out.inputs.len() >= budget {
                            break 'replays;
                        }
                        let seed = generator_seed(config.seed_base, replay, index);
                        match self.runner.generate(code, index, seed, &config.limits) {
                            Ok(inputs) => out.inputs.extend(
                                inputs
                                    .into_iter()
                                    .map(|x| (x, InputSource::Generator { index, seed })),
                            ),
                            Err(e) => out
                                .generator_errors
                                .push(format!("generate_input_{index} (seed {seed}): {e}")),
                        }
                    }
                }
                out.inputs.truncate(budget);
            }
        }
        out
    }

    /// Runs `program` on `input` according to the problem's I/O mode.
    pub fn run_target(
        &self,
        problem: &Problem,
        program: &ProgramSource,
        input: &str,
        limits: &ExecLimits,
    ) -> crate::model::ExecutionOutcome {
        match problem.io_mode {
            IoMode::Stdin => self.executor.run_program(program, input, limits),
            IoMode::Functional => {
                let name = problem.function_name.as_deref().unwrap_or_default();
                self.runner.call_function(program, name, input, limits)
            }
        }
    }

    /// Checks one captured output against the response's verifier.
    pub fn check_output(
        &self,
        response: &TestResponse,
        source: InputSource,
        input: &str,
        output: &str,
        config: &JudgeConfig,
    ) -> CheckVerdict {
        match (response.kind, source) {
            (ResponseKind::IoPairs, InputSource::HardcodedPair { index }) => {
                match response.io_pairs.as_ref().and_then(|p| p.get(index)) {
                    Some(pair) => check_expected(output, &pair.expected_output),
                    None => {
                        CheckVerdict::failed(CheckStatus::CheckerError, "missing expected output")
                    }
                }
            }
            (ResponseKind::Harness, _) => {
                let code = response.harness_code.as_deref().unwrap_or_default();
                self.runner.check(code, input, output, &config.check_limits)
            }
            (ResponseKind::IoPairs, InputSource::Generator { .. }) => CheckVerdict::failed(
                CheckStatus::CheckerError,
                "generated input on an io_pairs response",
            ),
        }
    }

    pub fn judge_response(
        &self,
        response: &TestResponse,
        f: &ProgramSource,
        g: &ProgramSource,
        problem: &Problem,
        config: &JudgeConfig,
    ) -> JudgeRecord {
        let collected = self.collect_inputs(response, config);
        let inputs = collected
            .inputs
            .into_iter()
            .map(|(input, source)| {
                let outcome_f = self.run_target(problem, f, &input, &config.limits);
                let outcome_g = self.run_target(problem, g, &input, &config.limits);
                let divergent = outcome_f.status != outcome_g.status
                    || normalize_output(&outcome_f.stdout) != normalize_output(&outcome_g.stdout);
                let check_on_f =
                    self.check_output(response, source, &input, &outcome_f.stdout, config);
                let check_on_g =
                    self.check_output(response, source, &input, &outcome_g.stdout, config);
                InputEvaluation {
                    input_str: input,
                    source,
                    outcome_f,
                    outcome_g,
                    divergent,
                    check_on_f,
                    check_on_g,
                }
            })
            .collect();
        let mut record =
            JudgeRecord::from_evaluations(response, inputs, collected.generator_errors);
        record.reward = compute_reward(&record, &config.reward);
        record
    }

    /// Judges every job; output is aligned with `jobs` regardless of `parallelism`.
    pub fn judge_batch(
        &self,
        jobs: &[JudgeJob<'_>],
        config: &JudgeConfig,
        parallelism: usize,
    ) -> Vec<JudgeRecord> {
        par::map(jobs, parallelism, |job| {
            self.judge_response(job.response, job.f, job.g, job.problem, config)
        })
    }
}
