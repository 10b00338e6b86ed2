//! Sampling completions from a chat-completions endpoint.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::GatewayError;

pub const DEFAULT_API_KEY_ENV: &str = "HJ_API_KEY";

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

fn from_secs<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
    let v = f64::deserialize(d)?;
    Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Base URL or full chat-completions URL.
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub presence_penalty: f64,
    pub max_tokens: u32,
    pub n_samples: usize,
    #[serde(serialize_with = "secs", deserialize_with = "from_secs")]
    pub timeout: Duration,
    /// Retries after the first attempt.
    pub retry: u32,
    #[serde(serialize_with = "secs", deserialize_with = "from_secs")]
    pub backoff_base: Duration,
    pub max_requests_per_second: Option<f64>,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: String,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://localhost:8000/v1".into(),
            model_name: String::new(),
            temperature: 0.6,
            presence_penalty: 1.5,
            max_tokens: 32_000,
            n_samples: 8,
            timeout: Duration::from_secs(600),
            retry: 4,
            backoff_base: Duration::from_millis(500),
            max_requests_per_second: None,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::Config(m));
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad(format!("temperature {} must be >= 0", self.temperature));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be >= 1".into());
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be >= 1".into());
        }
        if self.timeout.is_zero() {
            return bad("timeout must be positive".into());
        }
        if let Some(rps) = self.max_requests_per_second {
            if !(rps > 0.0 && rps.is_finite()) {
                return bad(format!("max_requests_per_second {rps} must be positive"));
            }
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        let base = self.endpoint_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

/// Anything that turns a prompt into `cfg.n_samples` completions.
pub trait Sampler: Send + Sync {
    /// Completions in order; a refused or empty sample is `""` at its position.
    fn sample(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<String>, GatewayError>;
}

pub fn request_body(prompt: &str, cfg: &SamplingConfig, n: usize) -> Value {
    json!({
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature,
        "presence_penalty": cfg.presence_penalty,
        "max_tokens": cfg.max_tokens,
        "n": n,
    })
}

/// Message contents ordered by choice index; `null` content becomes `""`.
pub fn parse_choices(body: &Value) -> Result<Vec<String>, String> {
    let choices = body
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| "response has no choices array".to_string())?;
    let mut indexed: Vec<(u64, String)> = choices
        .iter()
        .enumerate()
        .map(|(pos, c)| {
            let index = c.get("index").and_then(Value::as_u64).unwrap_or(pos as u64);
            let text = c
                .pointer("/message/content")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            (index, text)
        })
        .collect();
    indexed.sort_by_key(|(i, _)| *i);
    Ok(indexed.into_iter().map(|(_, t)| t).collect())
}

enum Attempt {
    Done(Value),
    Retry(String),
    Fatal(GatewayError),
}

/// Blocking HTTP client. Safe to share across threads.
pub struct HttpSampler {
    agent: ureq::Agent,
    api_key: Option<String>,
    next_slot: Mutex<Instant>,
}

impl HttpSampler {
    pub fn new(cfg: &SamplingConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        Ok(Self {
            agent,
            api_key,
            next_slot: Mutex::new(Instant::now()),
        })
    }

    fn wait_for_slot(&self, cfg: &SamplingConfig) {
        let Some(rps) = cfg.max_requests_per_second else {
            return;
        };
        let interval = Duration::from_secs_f64(1.0 / rps);
        let wait = {
            let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn attempt(&self, url: &str, body: &Value) -> Attempt {
        let mut req = self.agent.post(url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        tracing::debug!(url, status, body = %text, "completion response");
        match status {
            200..=299 => match serde_json::from_str(&text) {
                Ok(v) => Attempt::Done(v),
                Err(e) => Attempt::Fatal(GatewayError::Transport {
                    url: url.into(),
                    message: format!("invalid JSON body: {e}"),
                }),
            },
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
            _ => Attempt::Fatal(GatewayError::Http {
                url: url.into(),
                status,
                body: text,
            }),
        }
    }

    fn request(
        &self,
        url: &str,
        body: &Value,
        cfg: &SamplingConfig,
    ) -> Result<Value, GatewayError> {
        tracing::debug!(url, body = %body, "completion request");
        let mut delay = cfg.backoff_base;
        let mut last = String::new();
        for attempt in 0..=cfg.retry {
            if attempt > 0 {
                tracing::warn!(url, attempt, "retrying after {last}");
                std::thread::sleep(delay);
                delay = (delay * 2).min(Duration::from_secs(60));
            }
            self.wait_for_slot(cfg);
            match self.attempt(url, body) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(why) => last = why,
            }
        }
        Err(GatewayError::Transport {
            url: url.into(),
            message: format!("gave up after {} attempts: {last}", cfg.retry + 1),
        })
    }
}

impl Sampler for HttpSampler {
    fn sample(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<String>, GatewayError> {
        cfg.validate()?;
        let url = cfg.completions_url();
        let mut out = Vec::with_capacity(cfg.n_samples);
        // endpoints may return fewer choices than asked for; ask again for the rest
        while out.len() < cfg.n_samples {
            let body = request_body(prompt, cfg, cfg.n_samples - out.len());
            let value = self.request(&url, &body, cfg)?;
            let texts = parse_choices(&value).map_err(|message| GatewayError::Transport {
                url: url.clone(),
                message,
            })?;
            if texts.is_empty() {
                return Err(GatewayError::Transport {
                    url,
                    message: "response contained no choices".into(),
                });
            }
            out.extend(texts);
        }
        out.truncate(cfg.n_samples);
        Ok(out)
    }
}
