//! Error types shared by all estimators.

use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by estimation and validation routines.
///
/// `Validation` flags ill-formed inputs (dimension mismatches, parameters
/// outside their domain). `Estimation` and `Initialization` flag data
/// configurations on which a fit cannot proceed (an emptied class, every
/// random restart failing). `DegenerateCovariance` flags covariance inputs
/// with no usable volume.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
    #[error("estimation: {0}")]
    Estimation(String),
    #[error("initialization: {0}")]
    Initialization(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }
}
