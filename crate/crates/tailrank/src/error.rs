//! Error types shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by loaders, scorers and the evaluation kit.
#[derive(Debug, Error)]
pub enum Error {
    /// A record file could not be read.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line of a record file failed to parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Well-formed input that violates a store invariant (duplicate ids,
    /// mention spans that do not match the text, ...).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// The caller passed arguments outside an operation's contract.
    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
