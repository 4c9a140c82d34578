//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input at a specific line of a text file (JSONL, word vectors).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally valid input that violates a corpus-wide constraint.
    #[error("schema error: {0}")]
    Schema(String),

    /// A numeric field outside its documented range.
    #[error("value {value} out of range for field `{field}`")]
    Range { field: String, value: f64 },

    /// Incompatible array/matrix dimensions.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The corpus pool cannot supply a requested environment size.
    #[error("capacity exceeded in cell {cell}: need {needed}, have {available}")]
    Capacity {
        cell: String,
        needed: usize,
        available: usize,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    /// A fairness metric is undefined because a conditioning group is empty.
    #[error("metric undefined: empty group {group}")]
    UndefinedMetric { group: String },

    /// The overfit filter removed every candidate setting.
    #[error("no candidate settings survived the overfit filter")]
    NoCandidates,

    /// A binary file does not match the expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    /// Invalid experiment or CLI configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code: 2 for configuration problems, 3 for capacity, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Schema(_)
            | Error::Range { .. }
            | Error::Argument(_)
            | Error::Config(_) => 2,
            Error::Capacity { .. } => 3,
            _ => 1,
        }
    }
}
