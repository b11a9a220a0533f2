use std::path::PathBuf;

use crate::fitkit::FitResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("negative rate: {name} = {value}")]
    NegativeRate { name: &'static str, value: f64 },

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    #[error("invalid combination: {0}")]
    InvalidCombination(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    /// Fit hit its iteration limit; carries the best parameters seen so far.
    #[error("fit did not converge after {} iterations", .0.iterations)]
    FitNotConverged(Box<FitResult>),

    #[error("no peak found: {0}")]
    NoPeakFound(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Field-level configuration problems, one message per field.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("invariant violation in {field}: {message}")]
    InvariantViolation { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvariantViolation {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Rejects NaN and infinities with a message naming the offending quantity.
pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteInput(format!("{name} = {value}")))
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(format!("{name} must be finite and > 0, got {value}")))
    }
}
