use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or missing configuration (missing column, out-of-range field, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A demographic group (or group/conditioning-set cell) that a computation
    /// needs is empty.
    #[error("degenerate group: {0}")]
    DegenerateGroup(String),

    #[error("empty federation: {0}")]
    EmptyFederation(String),

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("round {round} failed: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
