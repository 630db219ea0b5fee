use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Variants fall into two families which the CLI maps to distinct exit
/// codes: input/validation problems and training failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate key {key} in {what}")]
    Duplicate { what: &'static str, key: String },

    #[error("records reference unknown tweet ids: {}", .0.join(", "))]
    DanglingTweetIds(Vec<String>),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing feature block: {0}")]
    MissingFeature(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training failed: {0}")]
    Training(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors caused by a model failing to fit rather than by bad input.
    pub fn is_training_failure(&self) -> bool {
        matches!(self, Error::Training(_) | Error::NonFinite(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
