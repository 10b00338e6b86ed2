//! Model-facing side of harnessjudge: prompt rendering, sampling from a
//! chat-completions endpoint (live, recorded or replayed) and parsing of the
//! sampled text into responses and strategy labels.

pub mod classify;
pub mod error;
pub mod parse;
pub mod prompt;
pub mod sampling;
pub mod transcript;

pub use classify::{classify_strategies, InputStrategy, OutputStrategy, StrategyLabels};
pub use error::{GatewayError, ParseError};
pub use parse::{
    parse_harness_response, parse_io_response, parse_or_unparsed, parse_response, ResponseIds,
};
pub use prompt::{render_prompt, render_template, PromptKind, PromptValues};
pub use sampling::{HttpSampler, Sampler, SamplingConfig};
pub use transcript::{RecordingSampler, ReplaySampler, TranscriptEntry};

/// Samples `cfg.n_samples` completions for `prompt`.
pub fn sample_responses(
    sampler: &dyn Sampler,
    prompt: &str,
    cfg: &SamplingConfig,
) -> Result<Vec<String>, GatewayError> {
    cfg.validate()?;
    sampler.sample(prompt, cfg)
}
