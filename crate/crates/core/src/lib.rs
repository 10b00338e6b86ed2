//! Execution and evaluation engine for generated test harnesses and
//! input-output tests.
//!
//! Responses are judged against a buggy target program and a ground-truth
//! program in sandboxed child processes. The resulting [`model::JudgeRecord`]s
//! feed the reward and GI/ITR/TBR metrics, best-of-N selection, and the
//! corpus construction pipeline.

pub mod corpus;
pub mod engine;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod par;
pub mod runner;
pub mod selection;

pub use engine::{normalize_output, Judge, JudgeConfig, JudgeJob};
pub use error::{ConfigError, ModelError, PipelineError};
pub use exec::{ExecLimits, Executor, RuntimeConfig};
pub use metrics::{compute_reward, response_flags, RewardConfig};
pub use model::*;
pub use runner::{HarnessRunner, ShimRunner};

/// A judge wired to real subprocesses for both programs and the runner shim.
pub fn shim_judge(runtime: RuntimeConfig) -> Judge {
    let executor = Executor::new(runtime);
    Judge::new(executor.clone(), Box::new(ShimRunner::new(executor)))
}
