use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed manifest line: {reason}")]
    ManifestLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("video {id} references unknown parent {parent}")]
    DanglingParent { id: String, parent: String },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("expected {expected} frames, found {found}")]
    FrameCountMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("split contamination: {0}")]
    Contamination(String),

    #[error("checksum mismatch: expected {expected}, found {found}")]
    ChecksumMismatch { expected: String, found: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ManifestLine { .. }
                | Error::DanglingParent { .. }
                | Error::InvalidInput(_)
                | Error::Config(_)
                | Error::Contamination(_)
                | Error::ChecksumMismatch { .. }
        )
    }
}
