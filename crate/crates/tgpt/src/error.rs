//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("size mismatch for {what}: expected {expected}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid network spec: {0}")]
    BadSpec(String),

    #[error("{what} = {value} outside {low}..{high}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: String, index: usize },

    #[error("degenerate range [{low}, {high}] for {what}")]
    DegenerateRange {
        what: &'static str,
        low: f64,
        high: f64,
    },

    #[error("jet is missing second derivatives required by {0}")]
    MissingHessian(&'static str),

    #[error("training diverged: loss {loss:.3e} at iteration {iter}")]
    Diverged {
        loss: f64,
        iter: usize,
        history: Vec<(usize, f64)>,
    },

    #[error("unknown problem id {0:?}")]
    UnknownProblem(String),

    #[error("grid is not uniform: spacing {got:.3e} vs {expected:.3e} at index {index}")]
    NonUniformGrid {
        expected: f64,
        got: f64,
        index: usize,
    },

    #[error("interpolation matrix is singular at row {0}")]
    SingularBasis(usize),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
