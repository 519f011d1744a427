use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, StcError>;

#[derive(Debug, Error)]
pub enum StcError {
    /// Malformed input text; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs that violate a structural precondition (misaligned, wrong shape).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value while encoding document {doc} at sweep {sweep}")]
    Numerical { doc: usize, sweep: usize },

    #[error("numerical failure at outer iteration {iter}: {source}")]
    Training {
        iter: usize,
        #[source]
        source: Box<StcError>,
    },

    #[error("invalid model file: {0}")]
    Model(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl StcError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        StcError::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        StcError::Domain(message.into())
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        StcError::Contract(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StcError::Io {
            path: path.into(),
            source,
        }
    }
}
