use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the retrieval toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image is {width}x{height}; both dimensions must be at least 16")]
    DimensionTooSmall { width: usize, height: usize },

    #[error("image dimensions {width}x{height} are not multiples of 16")]
    DimensionNotAligned { width: usize, height: usize },

    #[error("pixel buffer holds {actual} pixels, expected {expected}")]
    PixelCountMismatch { expected: usize, actual: usize },

    #[error("malformed block grid: {0}")]
    MalformedGrid(String),

    #[error("need at least {needed} patch descriptors to build the codebook, got {available}")]
    InsufficientDescriptors { needed: usize, available: usize },

    #[error("invalid clustering config: {0}")]
    InvalidConfig(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("duplicate image id `{0}`")]
    DuplicateId(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("codebook hash mismatch: store was built with {expected}, got {actual}")]
    HashMismatch { expected: String, actual: String },

    #[error("invalid {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("image codec: {0}")]
    Encode(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem or the external image codec.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Codec { .. } | Error::Encode(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
