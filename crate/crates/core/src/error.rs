use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch in {what}: expected {expected}, got {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("AUC is undefined: labels contain {positives} positives and {negatives} negatives")]
    AucUndefined { positives: usize, negatives: usize },
    #[error("exhaustive search refused: C({topics}, {slate}) = {subsets} exceeds the cap of {cap}")]
    SearchTooLarge {
        topics: usize,
        slate: usize,
        subsets: u128,
        cap: u128,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// Failures while reading a binary model file.
///
/// Every variant has a stable numeric [`code`](CheckpointError::code) so that
/// callers (and the CLI exit status) can tell them apart.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("dimension mismatch for {name}: expected {expected}, file has {found}")]
    DimensionMismatch {
        name: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("file is truncated: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("{0} trailing bytes after the last array")]
    TrailingBytes(usize),
    #[error("embedded string is not valid UTF-8")]
    InvalidText,
}

impl CheckpointError {
    pub fn code(&self) -> u8 {
        match self {
            CheckpointError::BadMagic { .. } => 10,
            CheckpointError::UnsupportedVersion { .. } => 11,
            CheckpointError::DimensionMismatch { .. } => 12,
            CheckpointError::Truncated { .. } => 13,
            CheckpointError::TrailingBytes(_) => 14,
            CheckpointError::InvalidText => 15,
        }
    }
}
