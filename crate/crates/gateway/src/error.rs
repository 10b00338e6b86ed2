use thiserror::Error;

use crate::prompt::PromptKind;

/// Why a raw model output could not become a `TestResponse` or label list.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no fenced code block found")]
    NoCodeBlock,
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("prompt {kind:?} needs a value for {{{placeholder}}}")]
    MissingPlaceholder {
        kind: PromptKind,
        placeholder: &'static str,
    },
    #[error("invalid sampling config: {0}")]
    Config(String),
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("{url} answered HTTP {status}: {body}")]
    Http {
        url: String,
        status: u16,
        body: String,
    },
    #[error("no recorded transcript for model {model:?} and this prompt")]
    ReplayMiss { model: String },
    #[error("transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("classification: {0}")]
    Classification(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
