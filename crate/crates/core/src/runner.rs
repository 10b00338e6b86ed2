//! Engine side of the harness runner protocol.
//!
//! The runner shim is a separate executable that loads a Python harness (or a
//! functional-mode target) and performs exactly one phase per process:
//!
//! ```text
//! <shim...> generate       <harness_path> <generator_index> <seed>   stdin: empty
//! <shim...> check          <harness_path>                            stdin: {"input_str","output_str"}
//! <shim...> functional_call <program_path>                           stdin: {"function_name","input_str"}
//! ```
//!
//! It replies with one JSON object on stdout,
//! `{"status": "ok"|"fail"|"error", "inputs"?: [..], "message"?: ".."}`,
//! and exits 0. A nonzero exit means the shim itself broke. Timeouts are
//! enforced here, not in the shim. See `PROTOCOL.md` at the repository root.

use serde::{Deserialize, Serialize};

use crate::exec::{ExecLimits, Executor};
use crate::model::{CheckStatus, CheckVerdict, ExecStatus, ExecutionOutcome, ProgramSource};

pub const HARNESS_FILE: &str = "harness.py";
pub const SOLUTION_FILE: &str = "solution.py";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyStatus {
    Ok,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerReply {
    pub status: ReplyStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Serialize)]
struct CheckPayload<'a> {
    input_str: &'a str,
    output_str: &'a str,
}

#[derive(Debug, Serialize)]
struct CallPayload<'a> {
    function_name: &'a str,
    input_str: &'a str,
}

/// The three harness-side operations the judge needs.
pub trait HarnessRunner: Send + Sync {
    /// Runs `generate_input_<index>` with the RNG seeded by `seed`.
    fn generate(
        &self,
        harness_code: &str,
        index: u32,
        seed: u64,
        limits: &ExecLimits,
    ) -> Result<Vec<String>, String>;

    /// Runs `check_output(input, output)`.
    fn check(
        &self,
        harness_code: &str,
        input: &str,
        output: &str,
        limits: &ExecLimits,
    ) -> CheckVerdict;

    /// Calls `function_name` of a functional-mode program with JSON-array
    /// arguments. The JSON-serialized return value is reported as stdout.
    fn call_function(
        &self,
        program: &ProgramSource,
        function_name: &str,
        args_json: &str,
        limits: &ExecLimits,
    ) -> ExecutionOutcome;
}

/// [`HarnessRunner`] backed by one shim process per call.
#[derive(Debug, Clone)]
pub struct ShimRunner {
    executor: Executor,
}

impl ShimRunner {
    pub fn new(executor: Executor) -> Self {
        Self { executor }
    }

    fn invoke(
        &self,
        file_name: &str,
        contents: &str,
        args: &[String],
        stdin: &str,
        limits: &ExecLimits,
    ) -> (ExecutionOutcome, Option<RunnerReply>) {
        let mut argv = self.executor.runtime().shim_command.clone();
        argv.extend_from_slice(args);
        let outcome = self
            .executor
            .run_in_scratch(&[(file_name, contents)], &argv, stdin, limits);
        let reply = match outcome.status {
            ExecStatus::Success => parse_reply(&outcome.stdout),
            _ => None,
        };
        (outcome, reply)
    }
}

/// Parses the last non-empty stdout line as a reply, so stray prints from
/// harness code before the reply do not break the protocol.
pub fn parse_reply(stdout: &str) -> Option<RunnerReply> {
    let line = stdout.lines().rev().find(|l| !l.trim().is_empty())?;
    serde_json::from_str(line).ok()
}

fn shim_fault(outcome: &ExecutionOutcome) -> String {
    match outcome.status {
        ExecStatus::Timeout => format!("timed out after {:.1}s", outcome.wall_time.as_secs_f64()),
        ExecStatus::SetupError => format!("runner unavailable: {}", outcome.stderr.trim()),
        ExecStatus::RuntimeError => format!(
            "runner fault (exit {:?}): {}",
            outcome.exit_code,
            excerpt(&outcome.stderr)
        ),
        ExecStatus::Success => format!("malformed runner reply: {}", excerpt(&outcome.stdout)),
    }
}

fn excerpt(text: &str) -> String {
    const MAX: usize = 400;
    let t = text.trim();
    if t.len() <= MAX {
        return t.to_string();
    }
    let mut cut = t.len() - MAX;
    while !t.is_char_boundary(cut) {
        cut += 1;
    }
    format!("...{}", &t[cut..])
}

impl HarnessRunner for ShimRunner {
    fn generate(
        &self,
        harness_code: &str,
        index: u32,
        seed: u64,
        limits: &ExecLimits,
    ) -> Result<Vec<String>, String> {
        let args = [
            "generate".to_string(),
            HARNESS_FILE.to_string(),
            index.to_string(),
            seed.to_string(),
        ];
        let (outcome, reply) = self.invoke(HARNESS_FILE, harness_code, &args, "", limits);
        let Some(reply) = reply else {
            return Err(shim_fault(&outcome));
        };
        match (reply.status, reply.inputs) {
            (ReplyStatus::Ok, Some(inputs)) if !inputs.is_empty() => Ok(inputs),
            (ReplyStatus::Ok, _) => Err("invalid generator contract".into()),
            (_, _) => Err(reply.message.unwrap_or_else(|| "generator error".into())),
        }
    }

    fn check(
        &self,
        harness_code: &str,
        input: &str,
        output: &str,
        limits: &ExecLimits,
    ) -> CheckVerdict {
        let payload = serde_json::to_string(&CheckPayload {
            input_str: input,
            output_str: output,
        })
        .expect("payload serializes");
        let args = ["check".to_string(), HARNESS_FILE.to_string()];
        let (outcome, reply) = self.invoke(HARNESS_FILE, harness_code, &args, &payload, limits);
        if outcome.status == ExecStatus::Timeout {
            return CheckVerdict::failed(CheckStatus::CheckTimeout, shim_fault(&outcome));
        }
        let Some(reply) = reply else {
            return CheckVerdict::failed(CheckStatus::CheckerError, shim_fault(&outcome));
        };
        let message = reply.message.unwrap_or_default();
        match reply.status {
            ReplyStatus::Ok => CheckVerdict::pass(),
            ReplyStatus::Fail => CheckVerdict::failed(CheckStatus::AssertionFail, message),
            ReplyStatus::Error => CheckVerdict::failed(CheckStatus::CheckerError, message),
        }
    }

    fn call_function(
        &self,
        program: &ProgramSource,
        function_name: &str,
        args_json: &str,
        limits: &ExecLimits,
    ) -> ExecutionOutcome {
        let payload = serde_json::to_string(&CallPayload {
            function_name,
            input_str: args_json,
        })
        .expect("payload serializes");
        let args = ["functional_call".to_string(), SOLUTION_FILE.to_string()];
        let (outcome, reply) = self.invoke(SOLUTION_FILE, &program.code, &args, &payload, limits);
        match (outcome.status, reply) {
            (ExecStatus::Success, Some(reply)) => match reply.status {
                ReplyStatus::Ok => ExecutionOutcome {
                    stdout: reply.message.unwrap_or_default(),
                    ..outcome
                },
                _ => ExecutionOutcome {
                    status: ExecStatus::RuntimeError,
                    stdout: String::new(),
                    stderr: reply.message.unwrap_or_default(),
                    exit_code: outcome.exit_code,
                    wall_time: outcome.wall_time,
                },
            },
            (ExecStatus::Success, None) => ExecutionOutcome {
                status: ExecStatus::RuntimeError,
                stderr: shim_fault(&outcome),
                stdout: String::new(),
                ..outcome
            },
            _ => outcome,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::RuntimeConfig;
    use crate::model::Role;

    /// A fake shim written in sh that always prints `reply`.
    fn runner_replying(reply: &str) -> ShimRunner {
        let script = format!("cat >/dev/null; printf '%s\\n' '{reply}'");
        ShimRunner::new(Executor::new(RuntimeConfig {
            shim_command: vec!["sh".into(), "-c".into(), script, "shim".into()],
            ..RuntimeConfig::default()
        }))
    }

    #[test]
    fn reply_parsing_uses_last_line() {
        let r = parse_reply("debug print\n{\"status\":\"ok\",\"inputs\":[\"1\"]}\n\n").unwrap();
        assert_eq!(r.status, ReplyStatus::Ok);
        assert_eq!(r.inputs.unwrap(), vec!["1".to_string()]);
        assert!(parse_reply("").is_none());
        assert!(parse_reply("nope").is_none());
    }

    #[test]
    fn check_reply_maps_to_verdicts() {
        let limits = ExecLimits::check_default();
        let ok = runner_replying(r#"{"status":"ok"}"#).check("h", "1", "1", &limits);
        assert_eq!(ok, CheckVerdict::pass());
        let fail = runner_replying(r#"{"status":"fail","message":"not sorted"}"#)
            .check("h", "1", "1", &limits);
        assert_eq!(fail.status, CheckStatus::AssertionFail);
        assert_eq!(fail.message.as_deref(), Some("not sorted"));
        let err = runner_replying(r#"{"status":"error","message":"ZeroDivisionError"}"#)
            .check("h", "1", "1", &limits);
        assert_eq!(err.status, CheckStatus::CheckerError);
        let garbage = runner_replying("not json").check("h", "1", "1", &limits);
        assert_eq!(garbage.status, CheckStatus::CheckerError);
        assert!(garbage.message.is_some());
    }

    #[test]
    fn generate_with_empty_inputs_breaks_contract() {
        let limits = ExecLimits::default();
        let r = runner_replying(r#"{"status":"ok","inputs":[]}"#).generate("h", 1, 0, &limits);
        assert_eq!(r.unwrap_err(), "invalid generator contract");
        let r = runner_replying(r#"{"status":"error","message":"generator not found"}"#)
            .generate("h", 1, 0, &limits);
        assert_eq!(r.unwrap_err(), "generator not found");
    }

    #[test]
    fn shim_crash_maps_to_checker_error() {
        let runner = ShimRunner::new(Executor::new(RuntimeConfig {
            shim_command: vec!["sh".into(), "-c".into(), "exit 9".into(), "shim".into()],
            ..RuntimeConfig::default()
        }));
        let v = runner.check("h", "", "", &ExecLimits::check_default());
        assert_eq!(v.status, CheckStatus::CheckerError);
        assert!(v.message.unwrap().contains("exit Some(9)"));
    }

    #[test]
    fn hanging_check_is_check_timeout() {
        let runner = ShimRunner::new(Executor::new(RuntimeConfig {
            shim_command: vec!["sh".into(), "-c".into(), "sleep 30".into(), "shim".into()],
            ..RuntimeConfig::default()
        }));
        let limits =
            ExecLimits::check_default().with_wall_time(std::time::Duration::from_millis(300));
        let v = runner.check("h", "", "", &limits);
        assert_eq!(v.status, CheckStatus::CheckTimeout);
    }

    #[test]
    fn functional_call_reply_becomes_stdout() {
        let prog = ProgramSource::new("p", "q", Role::GroundTruth, "def f(x): return x");
        let limits = ExecLimits::default();
        let ok = runner_replying(r#"{"status":"ok","message":"[1,2,3]"}"#).call_function(
            &prog,
            "f",
            "[[3,1,2]]",
            &limits,
        );
        assert_eq!(ok.status, ExecStatus::Success);
        assert_eq!(ok.stdout, "[1,2,3]");
        let err = runner_replying(r#"{"status":"error","message":"ValueError: bad"}"#)
            .call_function(&prog, "f", "[", &limits);
        assert_eq!(err.status, ExecStatus::RuntimeError);
        assert!(err.stderr.contains("ValueError"));
    }
}
