//! Recording and replaying sampler traffic as JSONL transcripts, keyed by
//! model name and prompt text.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;
use crate::sampling::{Sampler, SamplingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub model: String,
    pub prompt: String,
    pub responses: Vec<String>,
}

/// Wraps a sampler and appends every exchange to a transcript file.
pub struct RecordingSampler<S> {
    inner: S,
    file: Mutex<File>,
}

impl<S: Sampler> RecordingSampler<S> {
    pub fn new(inner: S, path: &Path) -> Result<Self, GatewayError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            file: Mutex::new(file),
        })
    }
}

impl<S: Sampler> Sampler for RecordingSampler<S> {
    fn sample(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<String>, GatewayError> {
        let responses = self.inner.sample(prompt, cfg)?;
        let entry = TranscriptEntry {
            model: cfg.model_name.clone(),
            prompt: prompt.to_string(),
            responses,
        };
        let line =
            serde_json::to_string(&entry).map_err(|e| GatewayError::Transcript(e.to_string()))?;
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(file, "{line}")?;
        file.flush()?;
        Ok(entry.responses)
    }
}

type Queues = HashMap<(String, String), VecDeque<Vec<String>>>;

/// Serves recorded responses without touching the network.
///
/// Repeated prompts are answered in recording order; once a key's entries are
/// used up its last entry keeps being returned.
pub struct ReplaySampler {
    entries: Mutex<Queues>,
}

impl ReplaySampler {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut map: Queues = HashMap::new();
        for e in entries {
            map.entry((e.model, e.prompt))
                .or_default()
                .push_back(e.responses);
        }
        Self {
            entries: Mutex::new(map),
        }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let reader = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(&line).map_err(|e| {
                GatewayError::Transcript(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }
}

impl Sampler for ReplaySampler {
    fn sample(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<String>, GatewayError> {
        let mut map = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        let queue = map
            .get_mut(&(cfg.model_name.clone(), prompt.to_string()))
            .filter(|q| !q.is_empty())
            .ok_or_else(|| GatewayError::ReplayMiss {
                model: cfg.model_name.clone(),
            })?;
        let responses = if queue.len() > 1 {
            queue.pop_front().unwrap_or_default()
        } else {
            queue[0].clone()
        };
        if responses.len() != cfg.n_samples {
            tracing::warn!(
                recorded = responses.len(),
                requested = cfg.n_samples,
                "transcript sample count differs from request"
            );
        }
        Ok(responses)
    }
}
