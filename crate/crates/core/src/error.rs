use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("degenerate mode {index}: a_j|lambda_j| = 0, Gaussian factor undefined")]
    DegenerateMode { index: usize },

    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    #[error("insufficient effective sample size: {got:.1} < {required:.1}")]
    InsufficientSamples { got: f64, required: f64 },

    #[error("relaxation-time search bracket exhausted at t = {t_max}")]
    BracketExhausted { t_max: f64 },

    #[error("truncation not converged: relative change {rel_delta:.4} exceeds {threshold}")]
    NotConverged { rel_delta: f64, threshold: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
