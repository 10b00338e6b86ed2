//! File plumbing: JSONL in/out and the run manifest written next to outputs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use harnessjudge::{Corpus, TestResponse};

use crate::error::{CliError, ResultExt};

pub fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    let file = File::open(path).with_validation(|| format!("opening corpus {}", path.display()))?;
    Corpus::read(BufReader::new(file))
        .with_validation(|| format!("reading corpus {}", path.display()))
}

pub fn read_responses(path: &Path) -> Result<Vec<TestResponse>, CliError> {
    let file =
        File::open(path).with_validation(|| format!("opening responses {}", path.display()))?;
    harnessjudge::read_responses(BufReader::new(file))
        .with_validation(|| format!("reading responses {}", path.display()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).with_validation(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_validation(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_validation(|| format!("{}:{}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

/// Lines to `path` via a temporary sibling and rename, or to stdout.
pub fn write_lines(path: Option<&Path>, lines: &[String]) -> Result<(), CliError> {
    match path {
        Some(path) => {
            let tmp = tmp_sibling(path);
            {
                let file =
                    File::create(&tmp).with_internal(|| format!("creating {}", tmp.display()))?;
                let mut w = BufWriter::new(file);
                for line in lines {
                    writeln!(w, "{line}").internal()?;
                }
                w.flush().internal()?;
            }
            std::fs::rename(&tmp, path).with_internal(|| format!("writing {}", path.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            for line in lines {
                writeln!(w, "{line}").internal()?;
            }
            w.flush().internal()
        }
    }
}

pub fn write_jsonl<T: Serialize>(path: Option<&Path>, items: &[T]) -> Result<(), CliError> {
    let lines = items
        .iter()
        .map(|i| serde_json::to_string(i).internal())
        .collect::<Result<Vec<_>, _>>()?;
    write_lines(path, &lines)
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// `<out>.manifest.json`: the manifest that produced `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// `<out>.errors.jsonl`: per-item failures of a run.
pub fn errors_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".errors.jsonl");
    out.with_file_name(name)
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_at_unix_ms: u64,
    pub finished_at_unix_ms: u64,
}

impl RunManifest {
    pub fn start(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            argv: std::env::args().collect(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at_unix_ms: unix_ms(),
            finished_at_unix_ms: 0,
        }
    }

    pub fn config(mut self, snapshot: impl Serialize) -> Self {
        self.config = serde_json::to_value(snapshot).unwrap_or(Value::Null);
        self
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    /// Records `out` and writes the manifest next to it. No-op without `out`.
    pub fn finish(mut self, out: Option<&Path>, extra_outputs: &[PathBuf]) -> Result<(), CliError> {
        let Some(out) = out else {
            return Ok(());
        };
        self.outputs.push(out.to_path_buf());
        self.outputs.extend(extra_outputs.iter().cloned());
        self.finished_at_unix_ms = unix_ms();
        let text = serde_json::to_string_pretty(&self).internal()?;
        write_lines(Some(&manifest_path(out)), &[text])
    }
}
