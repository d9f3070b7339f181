use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the engine.
#[derive(Debug, Error)]
pub enum BlsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid value: {0}")]
    Value(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, BlsError>;

impl BlsError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        BlsError::Dimension(msg.into())
    }

    pub(crate) fn value(msg: impl Into<String>) -> Self {
        BlsError::Value(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        BlsError::State(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BlsError::Io {
            path: path.into(),
            source,
        }
    }
}
