use thiserror::Error;

/// Errors produced by the trait allocation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid trait: {0}")]
    InvalidTrait(String),

    #[error("index {index} exceeds horizon {horizon}")]
    IndexBeyondHorizon { index: usize, horizon: usize },

    #[error("horizon order violated: {smaller} is not <= {larger}")]
    HorizonOrder { smaller: usize, larger: usize },

    #[error("inconsistent allocation prefix at position {position}")]
    InconsistentPrefix { position: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid frequency model: {0}")]
    InvalidModel(String),

    #[error("invalid de Finetti measure: {0}")]
    InvalidMeasure(String),

    #[error("truncation caps exceeded: {0}")]
    CapsExceeded(String),

    #[error("constraint set has zero acceptance probability")]
    DegenerateConstraint,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("retries exhausted after {retries} attempts{}", index.map(|n| format!(" at index {n}")).unwrap_or_default())]
    RetriesExhausted { index: Option<usize>, retries: u64 },

    #[error("index {index} has membership profile {profile}, not encodable as {variant}")]
    Encoding {
        index: usize,
        profile: String,
        variant: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
