use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("contamination budget: {0}")]
    Budget(String),

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("sphere net would have {size} directions (cap {cap}); use a coarser resolution")]
    NetTooLarge { size: usize, cap: usize },

    #[error("unbounded min-max problem: {0}")]
    Unbounded(String),

    #[error("rank-degenerate sample: {0}")]
    RankDegenerate(String),

    #[error("inadmissible posterior parameters: {0}")]
    InadmissibleParams(String),

    #[error("projection failed after {sweeps} sweeps (residuals: {residuals})")]
    ProjectionFailed { sweeps: usize, residuals: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
