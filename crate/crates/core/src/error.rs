use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset contains a single class; both labels are required")]
    SingleClass,

    #[error("invalid example {index}: {reason}")]
    InvalidExample { index: usize, reason: String },

    #[error("invalid classifier: {0}")]
    InvalidClassifier(String),

    #[error("invalid linear program: {0}")]
    InvalidProgram(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("warm start is infeasible: {0}")]
    InfeasibleWarmStart(String),

    #[error("epsilon must be nonnegative, got {0}")]
    NegativeEpsilon(f64),

    #[error("invalid epsilon grid: {0}")]
    InvalidGrid(String),

    #[error("example index {index} out of range for dataset of {len} examples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dataset has no group tags (example {0} is untagged)")]
    MissingGroups(usize),

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("candidate {index} lies outside the epsilon-level set ({mistakes} mistakes > {allowed} allowed)")]
    OutsideLevelSet {
        index: usize,
        mistakes: u64,
        allowed: u64,
    },

    #[error("invalid penalty grid: {0}")]
    InvalidPenaltyGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal consistency violated: {0}")]
    Internal(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
