//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid collection: {0}")]
    Collection(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{path}:{line}: {msg}")]
    Label { path: String, line: usize, msg: String },

    #[error("{path}:{line}: {msg}")]
    Datatype { path: String, line: usize, msg: String },

    #[error("archive version mismatch: {0}")]
    Version(String),

    #[error("corrupt archive: {0}")]
    Archive(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable category, one token per variant. The CLI
    /// prints `error: <category>: <message>` on stderr and exits nonzero.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non-finite",
            Error::Config(_) => "config",
            Error::Collection(_) => "invalid-collection",
            Error::Parse { .. } => "parse",
            Error::Label { .. } => "label-mismatch",
            Error::Datatype { .. } => "datatype",
            Error::Version(_) => "version-mismatch",
            Error::Archive(_) => "corrupt-archive",
            Error::Solver(_) => "solver",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl std::fmt::Display, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn label(path: impl std::fmt::Display, line: usize, msg: impl Into<String>) -> Self {
        Error::Label {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn datatype(
        path: impl std::fmt::Display,
        line: usize,
        msg: impl Into<String>,
    ) -> Self {
        Error::Datatype {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
