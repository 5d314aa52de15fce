use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid response for {family} family at observation {index}: {value}")]
    InvalidResponse {
        family: &'static str,
        index: usize,
        value: f64,
    },

    #[error("operation requires the {expected} family")]
    WrongFamily { expected: &'static str },

    #[error("design matrix is rank deficient (column {column} is linearly dependent)")]
    RankDeficient { column: usize },

    #[error("degenerate fit: residual sum of squares {rss:e} makes the log-likelihood diverge")]
    DegenerateFit { rss: f64 },

    #[error("IRLS did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("log-likelihood is not finite")]
    NonFiniteLoglik,

    #[error("model space too large for exhaustive search: p = {p} exceeds {max}")]
    SpaceTooLarge { p: usize, max: usize },

    #[error("no model in the search space could be fitted")]
    AllModelsDegenerate,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cross-validation fold {fold} has a single-class training set")]
    FoldDegenerate { fold: usize },

    #[error("true model is empty; recall is undefined")]
    TruthEmpty,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}
