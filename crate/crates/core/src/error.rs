use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("training fault in round {round}, client {client}: {reason}")]
    Training {
        round: usize,
        client: usize,
        reason: String,
    },

    #[error("aggregation fault in round {round}: {reason}")]
    Aggregation { round: usize, reason: String },

    #[error("accounting fault: {0}")]
    Accounting(String),

    #[error("comparison fault: {0}")]
    Comparison(String),

    #[error("tuner fault: {0}")]
    Tuner(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a round index to faults raised below the round driver.
    pub(crate) fn in_round(self, round: usize) -> Self {
        match self {
            Error::Training { client, reason, .. } => Error::Training { round, client, reason },
            Error::Aggregation { reason, .. } => Error::Aggregation { round, reason },
            other => other,
        }
    }
}
