use std::path::PathBuf;

use aad_core::AadError;
use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: file has no data rows")]
    EmptyFile { path: PathBuf },

    #[error("{path}: no column named `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: column `{column}` is not numeric: {value:?}")]
    NonNumeric {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },

    #[error("{path}:{line}: unknown label value {value:?}")]
    UnknownLabel { path: PathBuf, line: u64, value: String },

    #[error("unknown instance id {0}")]
    UnknownInstance(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] AadError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
