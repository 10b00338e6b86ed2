use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}: malformed record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: invalid field `{field}`: {reason}")]
    Validation {
        line: usize,
        field: String,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("problem {problem}: {reason}")]
    Precondition { problem: String, reason: String },
    #[error("empty input list")]
    EmptyInputs,
}
