//! Running untrusted programs in child processes.
//!
//! Every run gets a fresh scratch directory (removed afterwards), its own
//! process group, a wall-clock deadline and an output cap. When the deadline
//! passes, or as soon as the main process exits, the whole process group is
//! sent SIGKILL so no descendants outlive the run.
//!
//! This is process-level isolation only. There are no namespaces, seccomp
//! filters or memory limits; do not point it at code you would not run
//! yourself.

use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::{ExecStatus, ExecutionOutcome, ProgramSource};
use crate::par;

pub const DEFAULT_WALL_TIME: Duration = Duration::from_secs(10);
pub const DEFAULT_CHECK_TIME: Duration = Duration::from_secs(5);
pub const DEFAULT_MAX_OUTPUT_BYTES: usize = 16 * 1024 * 1024;

/// Placeholder in command templates replaced by the program's file name.
pub const FILE_PLACEHOLDER: &str = "{file}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingDirPolicy {
    #[default]
    FreshTempDir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecLimits {
    #[serde(with = "duration_secs")]
    pub wall_time_limit: Duration,
    pub max_output_bytes: usize,
    #[serde(default)]
    pub working_dir_policy: WorkingDirPolicy,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            wall_time_limit: DEFAULT_WALL_TIME,
            max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
            working_dir_policy: WorkingDirPolicy::FreshTempDir,
        }
    }
}

impl ExecLimits {
    /// Limits for one `check_output` call.
    pub fn check_default() -> Self {
        Self::default().with_wall_time(DEFAULT_CHECK_TIME)
    }

    pub fn with_wall_time(mut self, limit: Duration) -> Self {
        self.wall_time_limit = limit;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.wall_time_limit.is_zero() {
            return Err(ConfigError::Invalid("wall_time_limit must be > 0".into()));
        }
        if self.max_output_bytes == 0 {
            return Err(ConfigError::Invalid("max_output_bytes must be > 0".into()));
        }
        Ok(())
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// How to launch programs and the runner shim on this host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeConfig {
    /// Command template for target programs; `{file}` becomes `source_file`.
    pub program_command: Vec<String>,
    /// File name the program source is written to inside its scratch dir.
    pub source_file: String,
    /// Command prefix for the harness runner shim.
    pub shim_command: Vec<String>,
    /// Parent directory for scratch dirs; system temp dir when unset.
    pub scratch_root: Option<PathBuf>,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            program_command: vec!["python3".into(), FILE_PLACEHOLDER.into()],
            source_file: "main.py".into(),
            shim_command: vec!["harness-runner".into()],
            scratch_root: None,
        }
    }
}

impl RuntimeConfig {
    pub const PROGRAM_CMD_ENV: &'static str = "HJ_PROGRAM_CMD";
    pub const SHIM_CMD_ENV: &'static str = "HJ_SHIM_CMD";
    pub const SCRATCH_ROOT_ENV: &'static str = "HJ_SCRATCH_ROOT";

    /// Defaults overridden by `HJ_PROGRAM_CMD`, `HJ_SHIM_CMD` (whitespace
    /// separated argv) and `HJ_SCRATCH_ROOT`.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Some(cmd) = env_argv(Self::PROGRAM_CMD_ENV) {
            cfg.program_command = cmd;
        }
        if let Some(cmd) = env_argv(Self::SHIM_CMD_ENV) {
            cfg.shim_command = cmd;
        }
        if let Some(root) = std::env::var_os(Self::SCRATCH_ROOT_ENV) {
            cfg.scratch_root = Some(root.into());
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.program_command.is_empty() {
            return Err(ConfigError::Invalid("program_command is empty".into()));
        }
        if self.shim_command.is_empty() {
            return Err(ConfigError::Invalid("shim_command is empty".into()));
        }
        if self.source_file.is_empty() || self.source_file.contains('/') {
            return Err(ConfigError::Invalid(
                "source_file must be a bare file name".into(),
            ));
        }
        Ok(())
    }
}

fn env_argv(key: &str) -> Option<Vec<String>> {
    let raw = std::env::var(key).ok()?;
    let argv: Vec<String> = raw.split_whitespace().map(str::to_owned).collect();
    (!argv.is_empty()).then_some(argv)
}

/// Thread-safe program launcher. Cheap to clone.
#[derive(Debug, Clone, Default)]
pub struct Executor {
    runtime: RuntimeConfig,
}

impl Executor {
    pub fn new(runtime: RuntimeConfig) -> Self {
        Self { runtime }
    }

    pub fn runtime(&self) -> &RuntimeConfig {
        &self.runtime
    }

    /// Runs `program` with `stdin_payload` on stdin.
    pub fn run_program(
        &self,
        program: &ProgramSource,
        stdin_payload: &str,
        limits: &ExecLimits,
    ) -> ExecutionOutcome {
        let file = self.runtime.source_file.as_str();
        let argv: Vec<String> = self
            .runtime
            .program_command
            .iter()
            .map(|a| a.replace(FILE_PLACEHOLDER, file))
            .collect();
        self.run_in_scratch(&[(file, &program.code)], &argv, stdin_payload, limits)
    }

    /// Runs each `(program, stdin)` job; results are aligned with `jobs`.
    pub fn run_program_batch(
        &self,
        jobs: &[(ProgramSource, String)],
        limits: &ExecLimits,
        parallelism: usize,
    ) -> Vec<ExecutionOutcome> {
        par::map(jobs, parallelism, |(program, input)| {
            self.run_program(program, input, limits)
        })
    }

    /// Writes `files` into a fresh scratch dir and runs `argv` there.
    pub fn run_in_scratch(
        &self,
        files: &[(&str, &str)],
        argv: &[String],
        stdin_payload: &str,
        limits: &ExecLimits,
    ) -> ExecutionOutcome {
        let scratch = match &self.runtime.scratch_root {
            Some(root) => tempfile::Builder::new().prefix("hj-").tempdir_in(root),
            None => tempfile::Builder::new().prefix("hj-").tempdir(),
        };
        let scratch = match scratch {
            Ok(dir) => dir,
            Err(e) => return ExecutionOutcome::setup_error(format!("scratch dir: {e}")),
        };
        for (name, contents) in files {
            if let Err(e) = std::fs::write(scratch.path().join(name), contents) {
                return ExecutionOutcome::setup_error(format!("writing {name}: {e}"));
            }
        }
        let mut outcome = run_process(argv, scratch.path(), stdin_payload, limits);
        // Interpreters print absolute script paths; keep records independent of
        // the random scratch directory name.
        let mut dirs = vec![scratch.path().to_path_buf()];
        if let Ok(real) = scratch.path().canonicalize() {
            dirs.push(real);
        }
        for dir in dirs {
            let prefix = format!("{}/", dir.display());
            for text in [&mut outcome.stdout, &mut outcome.stderr] {
                if text.contains(&prefix) {
                    *text = text.replace(&prefix, "");
                }
            }
        }
        outcome
    }
}

/// Spawns `argv` in `cwd` in its own process group and waits for it under `limits`.
pub fn run_process(
    argv: &[String],
    cwd: &Path,
    stdin_payload: &str,
    limits: &ExecLimits,
) -> ExecutionOutcome {
    let Some((program, args)) = argv.split_first() else {
        return ExecutionOutcome::setup_error("empty command");
    };
    let start = Instant::now();
    let mut child = match Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
    {
        Ok(child) => child,
        Err(e) => return ExecutionOutcome::setup_error(format!("failed to start {program}: {e}")),
    };
    let pgid = child.id() as i32;

    let stdin = child.stdin.take().map(|mut pipe| {
        let payload = stdin_payload.as_bytes().to_vec();
        // A program that never reads stdin closes the pipe early; that is not an error.
        thread::spawn(move || {
            let _ = pipe.write_all(&payload);
        })
    });
    let cap = limits.max_output_bytes;
    let stdout = child
        .stdout
        .take()
        .map(|p| thread::spawn(move || read_capped(p, cap)));
    let stderr = child
        .stderr
        .take()
        .map(|p| thread::spawn(move || read_capped(p, cap)));

    let waited = wait_with_deadline(&mut child, start + limits.wall_time_limit);
    kill_group(pgid);
    if waited.is_none() {
        // reap the killed leader
        let _ = child.wait();
    }
    let exit = waited;
    let wall_time = start.elapsed();

    if let Some(h) = stdin {
        let _ = h.join();
    }
    let (out, out_truncated) = stdout
        .map(|h| h.join().unwrap_or_default())
        .unwrap_or_default();
    let (err, err_truncated) = stderr
        .map(|h| h.join().unwrap_or_default())
        .unwrap_or_default();
    let mut stderr_text = String::from_utf8_lossy(&err).into_owned();
    if out_truncated {
        stderr_text.push_str(&format!("\n[stdout truncated at {cap} bytes]"));
    }
    if err_truncated {
        stderr_text.push_str(&format!("\n[stderr truncated at {cap} bytes]"));
    }
    let stdout_text = String::from_utf8_lossy(&out).into_owned();

    let (status, exit_code) = match exit {
        None => (ExecStatus::Timeout, None),
        Some(status) => match status.code() {
            Some(0) => (ExecStatus::Success, Some(0)),
            Some(code) => (ExecStatus::RuntimeError, Some(code)),
            None => {
                use std::os::unix::process::ExitStatusExt;
                if let Some(sig) = status.signal() {
                    stderr_text.push_str(&format!("\n[terminated by signal {sig}]"));
                }
                (ExecStatus::RuntimeError, None)
            }
        },
    };
    ExecutionOutcome {
        status,
        stdout: stdout_text,
        stderr: stderr_text,
        exit_code,
        wall_time,
    }
}

/// Polls until the child exits or the deadline passes. `None` means timed out.
fn wait_with_deadline(child: &mut Child, deadline: Instant) -> Option<std::process::ExitStatus> {
    let mut pause = Duration::from_micros(200);
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return Some(status),
            Ok(None) => {}
            Err(_) => return None,
        }
        let now = Instant::now();
        if now >= deadline {
            return None;
        }
        thread::sleep(pause.min(deadline - now));
        pause = (pause * 2).min(Duration::from_millis(5));
    }
}

fn kill_group(pgid: i32) {
    // SAFETY: kill(2) with a negative pid signals a process group; no memory is touched.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

/// Reads to EOF, keeping at most `cap` bytes and draining the rest.
fn read_capped(mut pipe: impl Read, cap: usize) -> (Vec<u8>, bool) {
    let mut kept = Vec::new();
    let mut truncated = false;
    let mut buf = [0u8; 8192];
    loop {
        match pipe.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => {
                let room = cap.saturating_sub(kept.len());
                if n > room {
                    truncated = true;
                }
                kept.extend_from_slice(&buf[..n.min(room)]);
            }
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(_) => break,
        }
    }
    (kept, truncated)
}
