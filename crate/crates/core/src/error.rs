use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("dataset at {0} contains no scenes")]
    EmptyDataset(PathBuf),

    #[error("not a patch bundle (bad magic)")]
    NotPatchBundle,

    #[error("not a model checkpoint (bad magic)")]
    NotCheckpoint,

    #[error("unsupported format version {0}")]
    Version(u32),

    #[error("architecture hash mismatch: file {found:#018x}, expected {expected:#018x}")]
    Architecture { expected: u64, found: u64 },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty mask")]
    EmptyMask,

    #[error("mask covers the whole image; no outside region")]
    FullMask,

    #[error("no valid depth pixels")]
    NoValidDepth,

    #[error("placement out of bounds: {0}")]
    OutOfBounds(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("image encoding failed for {path}: {msg}")]
    Image { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
