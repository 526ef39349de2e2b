use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The CLI maps these onto exit codes through [`Error::is_config`] and
/// [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, found {found}")]
    Shape {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("{path}: magic mismatch, expected {expected:#010x}, found {found:#010x}")]
    MagicMismatch {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated payload, expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("item count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn shape(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::NoConvergence(_))
    }

    pub fn is_config(&self) -> bool {
        !self.is_numerical() && !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
