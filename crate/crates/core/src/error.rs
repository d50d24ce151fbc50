//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition (bad sigma, even smoothing
    /// window, non-monotone anchors, and so on).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two motion values that must share a skeleton or frame rate do not.
    #[error("skeleton mismatch: {0}")]
    SkeletonMismatch(String),

    /// A retrieval query hit a library partition with no entries.
    #[error("gesture library has no {0} entries")]
    EmptyPartition(&'static str),

    /// A dataset line failed to parse or validate. Lines are 1-based.
    #[error("dataset error at line {line}: {msg}")]
    Dataset { line: usize, msg: String },

    /// Word lookup failed and the table has no `<unk>` fallback.
    #[error("no embedding for word {word:?} and the table has no <unk> entry")]
    MissingEmbedding { word: String },

    /// Vector dimensions disagree (embedding table vs. head, query vs. entries).
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Training produced a non-finite loss, usually a too-large learning rate.
    #[error("training diverged: loss became non-finite (reduce the learning rate)")]
    TrainingDiverged,

    /// A serialized artifact (library dir, head file, wav, bvh) is malformed.
    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}
