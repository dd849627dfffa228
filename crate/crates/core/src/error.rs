use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated a documented precondition.
    #[error("invalid {field}: {reason}")]
    Domain { field: String, reason: String },

    /// Neither circulant embedding nor covariance factorization produced a valid sampler.
    #[error("path synthesis failed: {0}")]
    Synthesis(String),

    /// Two paths that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Safeguarded root finding did not converge.
    #[error("root finder did not converge for u = {u} (bracket [{lo}, {hi}])")]
    RootFinding { u: f64, lo: f64, hi: f64 },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed result file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn domain(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
