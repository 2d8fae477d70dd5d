use std::fmt;
use std::process::ExitCode;

/// Failure of a subcommand, split by exit code: bad input or configuration
/// (2) versus everything else (1).
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Internal(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}

pub fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

/// Shorthand for a usage error with a formatted message.
macro_rules! usage_err {
    ($($arg:tt)*) => {
        $crate::error::CliError::Usage(anyhow::anyhow!($($arg)*))
    };
}
pub(crate) use usage_err;
