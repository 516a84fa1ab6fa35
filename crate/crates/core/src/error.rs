use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite, even after ridge regularization")]
    NonPositiveDefinite,

    #[error("responsibilities for row {row} underflow in every component")]
    DegenerateRow { row: usize },

    #[error("component {component} has no responsibility mass")]
    EmptyComponent { component: usize },

    #[error("weighted covariate scatter of component {component} is singular")]
    SingularDesign { component: usize },

    #[error("all {restarts} restarts failed")]
    AllRestartsFailed { restarts: usize },

    #[error("only {successes} bootstrap replicates succeeded (need at least 2)")]
    TooFewSuccesses { successes: usize },

    #[error("cause {cause} is outside 1..={n_causes}")]
    CauseOutOfRange { cause: usize, n_causes: usize },

    #[error("mixing weights sum to {sum}, not 1")]
    InvalidMixingWeights { sum: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
