//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, estimation, allocation and the
/// simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or structural argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Vector/matrix sizes do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix fails the Hermitian/PSD contract of a covariance.
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    /// A scenario or run configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// A metric has no defined value for the given input (e.g. SCN of the
    /// zero matrix, NMSE with zero truth energy).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfiguration(msg.into())
    }
}
