//! Shared error type for the crate.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A file could not be read or written.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file does not match the expected on-disk layout.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// Contents violate a data invariant (non-finite value, duplicate
    /// label, out-of-bounds index, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A payload is shorter or longer than its header promises.
    #[error("length error: expected {expected} values, found {found}")]
    Length { expected: usize, found: usize },

    /// Two vectors or matrices that must share a dimensionality do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The requested distance block exceeds the kernel's buffer budget;
    /// the caller must partition the work.
    #[error("kernel buffer budget exceeded: {cells} cells > {budget}")]
    KernelBudget { cells: u128, budget: u128 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
