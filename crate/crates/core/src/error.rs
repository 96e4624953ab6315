use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ExposeError>;

/// Every failure the library can surface.
///
/// The variants fall into four families that the CLI maps onto exit codes:
/// I/O, data validation (input, parse and model-file errors), and numeric
/// failures. See [`ExposeError::kind`].
#[derive(Debug, Error)]
pub enum ExposeError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature map mismatch: model was built with {expected}, got {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("{path}: bad IDX magic number {found:#010x}, expected {expected:#010x}")]
    IdxMagic { path: String, expected: u32, found: u32 },

    #[error("image file holds {images} items but label file holds {labels}")]
    LabelCountMismatch { images: usize, labels: usize },

    #[error("unsupported model format version {found} (expected {expected})")]
    ModelVersion { expected: u32, found: String },

    #[error("model file truncated: {0}")]
    ModelTruncated(String),

    #[error("model checksum mismatch on {what}: stored {stored}, computed {computed}")]
    ModelChecksum {
        what: &'static str,
        stored: String,
        computed: String,
    },

    #[error("model declares r = {declared_r} ({expected} weights) but carries {found} weights")]
    ModelWeightCount {
        declared_r: usize,
        expected: usize,
        found: usize,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Data,
    Numeric,
}

impl ExposeError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ExposeError::Io { .. } => ErrorKind::Io,
            ExposeError::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExposeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        ExposeError::Input(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(ExposeError::DimensionMismatch { expected, found })
    }
}
