use thiserror::Error;

use crate::balanced::IterationTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("unknown builtin polytope `{0}` (expected one of P1, P2, P1xP1, F1)")]
    UnknownBuiltin(String),

    #[error("invalid test configuration: {0}")]
    InvalidTestConfig(String),

    #[error("samples are not interpolated by a polynomial of degree {degree}: {detail}")]
    InconsistentSamples { degree: usize, detail: String },

    #[error("p-norm with p = {p} is degenerate (leading coefficient vanishes)")]
    DegenerateNorm { p: u32 },

    #[error("p must be a positive even integer, got {0}")]
    OddExponent(u32),

    #[error("higher Futaki coefficients need a product configuration")]
    NotProduct,

    #[error("incompatible operands: {0}")]
    Mismatch(String),

    #[error("quadrature tail estimate {tail:e} exceeds tolerance {tol:e} (box half-width {half_width})")]
    TailTolerance { tail: f64, tol: f64, half_width: f64 },

    #[error("all exponential terms underflow at x = {x:?}")]
    NumericalUnderflow { x: Vec<f64> },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Box<IterationTrace>,
    },

    #[error("derivative series decreases by {drop:e} at t = {t} (convexity violated)")]
    NonMonotone { t: f64, drop: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    File { path: std::path::PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
