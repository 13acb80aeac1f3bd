use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the evaluation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported volume format: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported voxel datatype: {0}")]
    UnsupportedDatatype(String),

    #[error("malformed header in {path}: {reason}")]
    InvalidHeader { path: PathBuf, reason: String },

    #[error("payload size mismatch: header implies {expected} bytes, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid geometry mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all differences are zero; the signed-rank statistic is undefined")]
    AllZeroDifferences,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
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
