use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sparsity budget {budget} for dimension {dim}")]
    InvalidBudget { budget: f64, dim: usize },

    #[error("gradient is identically zero")]
    ZeroGradient,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("encoding invariant violated: {0}")]
    EncodingInvariant(String),

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    #[error("corrupt frame: {0}")]
    CorruptFrame(String),

    #[error("incomplete round {iter}: {reason}")]
    IncompleteRound { iter: u32, reason: String },

    #[error("invalid cost model: {0}")]
    InvalidCostModel(String),

    #[error("{0} is only defined for the packet regime")]
    NotApplicable(&'static str),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("smoothness estimation did not converge after {iterations} iterations (last estimate {last_estimate})")]
    Estimation { iterations: usize, last_estimate: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
