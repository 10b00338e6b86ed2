use std::fmt;

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;

/// An error plus the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn validation(msg: impl fmt::Display) -> Self {
        Self {
            code: EXIT_VALIDATION,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub trait ResultExt<T> {
    fn validation(self) -> Result<T, CliError>;
    fn internal(self) -> Result<T, CliError>;
    fn with_validation<C: fmt::Display>(self, ctx: impl FnOnce() -> C) -> Result<T, CliError>;
    fn with_internal<C: fmt::Display>(self, ctx: impl FnOnce() -> C) -> Result<T, CliError>;
}

impl<T, E> ResultExt<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn validation(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: EXIT_VALIDATION,
            error: e.into(),
        })
    }

    fn internal(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: EXIT_INTERNAL,
            error: e.into(),
        })
    }

    fn with_validation<C: fmt::Display>(self, ctx: impl FnOnce() -> C) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: EXIT_VALIDATION,
            error: e.into().context(ctx().to_string()),
        })
    }

    fn with_internal<C: fmt::Display>(self, ctx: impl FnOnce() -> C) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: EXIT_INTERNAL,
            error: e.into().context(ctx().to_string()),
        })
    }
}
