use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // file formats
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("empty matrix (n={n}, d={d})")]
    EmptyMatrix { n: usize, d: usize },
    #[error("malformed label on line {line}: {text:?}")]
    MalformedLabel { line: usize, text: String },
    #[error("empty file")]
    EmptyFile,
    #[error("malformed value on line {line}: {text:?}")]
    MalformedValue { line: usize, text: String },
    #[error("malformed order file: {0}")]
    MalformedOrder(String),
    #[error("cannot read {}: {source}", path.display())]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // geometry
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero vector at index {0} (cosine distance undefined)")]
    ZeroVector(usize),

    // selection
    #[error("budget {requested} exceeds pool of {available} points")]
    BudgetExceedsPool { requested: usize, available: usize },
    #[error("duplicate seed index {0}")]
    DuplicateSeed(usize),
    #[error("index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("at least one initial center is required")]
    NoCenters,
    #[error("feature provider failed: {0}")]
    TrainerFailure(String),

    // proxy model
    #[error("training subset is empty")]
    EmptySubset,
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: u32, num_classes: usize },
    #[error("evaluation set is empty")]
    EmptyEvalSet,

    // configuration
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("budget {budget} exceeds pool of {n} points")]
    ScheduleExceedsPool { budget: usize, n: usize },
    #[error("budget {budget} exceeds order length {len}")]
    BudgetExceedsOrder { budget: usize, len: usize },
}

impl Error {
    /// True for write-side failures the caller did not cause through bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::IoFailure { .. } | Error::TrainerFailure(_))
    }
}
