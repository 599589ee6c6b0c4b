use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("invalid checkpoint {}: {reason}", file.display())]
    InvalidCheckpoint { file: PathBuf, reason: String },

    #[error("malformed row in {}, line {line}: {reason}", file.display())]
    MalformedRow {
        file: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("portion boundaries out of range for `{id}`: {reason}")]
    PortionOutOfRange { id: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("split is empty: {0}")]
    EmptySplit(String),

    #[error("no TrainG/DevelG individuals in corpus")]
    EmptyGlobalSplit,

    #[error("invalid span {start}..{end} for series of length {len}")]
    InvalidSpan { start: usize, end: usize, len: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("augmentation pool too small: requested {requested}, available {available}")]
    PoolTooSmall { requested: usize, available: usize },

    #[error("segment incompatible with pool: {0}")]
    FingerprintMismatch(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty {0} set")]
    EmptySet(&'static str),

    #[error("DWA enabled but no augmentation pool supplied")]
    MissingPool,

    #[error("individual `{0}` has no full segment in its personal training span")]
    EmptyPersonalSplit(String),

    #[error("labels missing on requested span of `{0}`")]
    UnlabeledSpan(String),

    #[error("unknown individual `{0}`")]
    UnknownIndividual(String),

    #[error("individual `{0}` is not a Test individual")]
    NotPersonalizable(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::InvalidDims(_) | Error::Json(_) => ErrorClass::Config,
            Error::NonFinite(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn malformed(file: impl Into<PathBuf>, line: u64, reason: impl Into<String>) -> Self {
        Error::MalformedRow {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }
}
