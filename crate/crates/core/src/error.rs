use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by dataset loading, auditing and mitigation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{0}` not found in header")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: {message}")]
    Row {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown model label `{0}`")]
    UnknownModel(String),

    #[error("level `{level}` not present in protected column (available: {})", available.join(", "))]
    UnknownLevel { level: String, available: Vec<String> },

    #[error("cell (subgroup `{level}`, label {label}) has no rows; weight is undefined")]
    EmptyCell { level: String, label: u8 },

    #[error("cannot merge audits: {0}")]
    Merge(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
