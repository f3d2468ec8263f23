use thiserror::Error;

/// Errors raised by the solvers and I/O helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode count mismatch: {left} vs {right}")]
    ModeMismatch { left: usize, right: usize },

    #[error("non-finite coefficient at mode {0}")]
    NonFinite(usize),

    #[error("grid of {points} points cannot resolve {modes} modes (need at least {})", 2 * .modes)]
    UnderResolvedGrid { points: usize, modes: usize },

    #[error("singular jacobian (smallest pivot {pivot:e})")]
    SingularJacobian { pivot: f64 },

    #[error("newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("continuation step {ds:e} fell below the minimum {ds_min:e}")]
    StepUnderflow { ds: f64, ds_min: f64 },

    #[error("bordered system is rank deficient (ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("field is numerically zero")]
    DegenerateField,

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed branch file at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("unsupported branch file version {found} (expected {expected})")]
    Version { found: String, expected: u32 },

    #[error("blow-up detected at t = {time}: sup norm {sup:e}")]
    BlowupDetected { time: f64, sup: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
