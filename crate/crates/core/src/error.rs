//! Error type shared across the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Theorem-1 style existence failure: the requested degree admits no
    /// invariants at all.
    #[error("no invariants: n does not divide 2r or k does not divide r (n={n}, k={k}, r={r})")]
    Gate { n: usize, k: usize, r: usize },

    /// A single-sided divisibility failure (building v or w tensors).
    #[error("dimension {dim} does not divide {total}")]
    Divisibility { dim: usize, total: usize },

    #[error("index {index} out of range 1..={bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix")]
    SingularMatrix,

    #[error("variable sets differ: {0} vs {1} variables")]
    VariableSetMismatch(usize, usize),

    #[error("relation construction failed: {0}")]
    Construction(String),

    #[error("invalid usage: {0}")]
    Usage(String),

    #[error("budget exceeded: need {needed}, budget {budget}")]
    Budget { needed: usize, budget: usize },

    #[error("malformed JSON: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
