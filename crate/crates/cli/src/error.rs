//! Error categories and their exit codes.

use std::process::ExitCode;

/// Top-level error: the category determines the exit status and the
/// machine-parsable prefix of the one-line message.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("error[validation]: {0}")]
    Validation(String),
    #[error("error[estimation]: {0}")]
    Estimation(String),
    #[error("error[io]: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Estimation(_) => ExitCode::from(2),
            CliError::Io(_) => ExitCode::from(3),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }
}

impl From<redda_core::Error> for CliError {
    fn from(e: redda_core::Error) -> Self {
        match e {
            redda_core::Error::Validation(m) => CliError::Validation(m),
            redda_core::Error::DegenerateCovariance(m)
            | redda_core::Error::Estimation(m)
            | redda_core::Error::Initialization(m) => CliError::Estimation(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
