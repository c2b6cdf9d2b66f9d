use std::fmt;
use std::process::ExitCode;

/// Failure of a command, split by who is at fault.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable, malformed or inconsistent inputs.
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        CliError::Input(anyhow::anyhow!("{msg}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) | CliError::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<tss_core::Error> for CliError {
    fn from(e: tss_core::Error) -> Self {
        use tss_core::Error::*;
        match e {
            Parse { .. } | Io { .. } | Validation(_) | InvalidParameter(_) | Format { .. } | Shape(_) | Saturated { .. } => {
                CliError::Input(e.into())
            }
            _ => CliError::Internal(e.into()),
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

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
