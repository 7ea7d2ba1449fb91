use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("series length {n} exceeds the brute-force oracle cap of {cap}")]
    OracleCap { n: usize, cap: usize },

    #[error("index {index} at position {position} is outside [0, {len})")]
    InvalidIndex { position: usize, index: i64, len: usize },

    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("extraction exhausted: requested {requested} change-points, only {found} extractable")]
    ExtractionExhausted { requested: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value at channel {channel}, sample {sample}")]
    NonFinite { channel: usize, sample: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// Coarse classification used by front ends (CLI exit codes, Python exceptions).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or arguments.
    Config,
    /// Bad or missing input data.
    Data,
    /// A violated internal invariant.
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidWindow(_)
            | Error::InvalidArgument(_)
            | Error::InvalidArch(_)
            | Error::InvalidConfig(_)
            | Error::OracleCap { .. } => ErrorClass::Config,
            Error::Shape(_)
            | Error::InvalidIndex { .. }
            | Error::InsufficientData(_)
            | Error::ExtractionExhausted { .. }
            | Error::NonFinite { .. }
            | Error::Parse { .. }
            | Error::ModelFormat(_)
            | Error::MissingFile(_)
            | Error::Io { .. }
            | Error::Json(_) => ErrorClass::Data,
            Error::Internal(_) => ErrorClass::Internal,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
