use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("invalid weight matrix: {0}")]
    InvalidWeight(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid region: {0}")]
    Region(String),

    #[error("step size underflow at t = {t} (h = {h}), last state {state:?}")]
    Stiffness { t: f64, h: f64, state: Vec<f64> },

    #[error("invalid query: {0}")]
    Query(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no bracketing interval found for {0}")]
    NoBracket(&'static str),

    #[error("invalid model spec: {0}")]
    Spec(String),
}
