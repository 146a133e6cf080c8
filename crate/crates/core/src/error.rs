//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across hashing, data loading, training,
/// analysis, and model persistence.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A class id fell outside the configured universe `[0, K)`.
    #[error("class id {class} is outside the universe of {universe} classes")]
    ClassOutOfRange { class: u64, universe: u64 },

    /// A feature index fell outside the configured dimension.
    #[error("feature index {index} is outside dimension {dim}")]
    FeatureOutOfRange { index: u64, dim: u64 },

    /// A training label fell outside the number of classes being trained.
    #[error("label {label} is outside the range of {classes} classes")]
    LabelOutOfRange { label: u64, classes: u64 },

    /// A text-format line failed to parse; `line` is 1-based.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    /// Training produced a non-finite loss; named by epoch and batch (0-based).
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    /// One member of the ensemble failed to train.
    #[error("sub-model {index} failed: {source}")]
    SubModel {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Two components that must agree on a size do not.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Integer arithmetic on sizes or costs exceeded the u64 range.
    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),

    /// A model file was written by an incompatible format version.
    #[error("unsupported model format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    /// A model file ended before the named section was complete.
    #[error("model file truncated inside section `{section}`")]
    Truncated { section: &'static str },

    /// A model file's trailing checksum does not match its contents.
    #[error("model file checksum mismatch")]
    ChecksumMismatch,

    /// A model file is structurally invalid in some other way.
    #[error("malformed model file: {0}")]
    MalformedModel(String),

    /// An underlying I/O operation failed.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
