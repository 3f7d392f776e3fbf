use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent with another.
    #[error("invalid configuration: `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// The config file could not be parsed (syntax, unknown key, type mismatch).
    #[error("cannot parse config {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("trace line {line}: {message}")]
    TraceParse { line: u64, message: String },

    #[error("invalid trace: {0}")]
    TraceValidation(String),

    #[error("sweep cell {cell} failed: {source}")]
    Sweep {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
