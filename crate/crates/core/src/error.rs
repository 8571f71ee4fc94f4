use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EqptError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EqptError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EqptError {
    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        EqptError::Dimension(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        EqptError::Argument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        EqptError::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EqptError::Io {
            path: path.into(),
            source,
        }
    }
}
