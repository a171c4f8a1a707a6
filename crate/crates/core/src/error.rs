use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve has no downward crossing: hold-last extrapolation with terminal probability {terminal}")]
    UnboundedCurve { terminal: f64 },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("probability {0} outside the open interval (0, 1)")]
    InvalidProbability(f64),
    #[error("percentile times are not monotone at level index {index}")]
    NonMonotonePcts { index: usize },
    #[error("dataset has no observed events")]
    NoEvents,
    #[error("split {index} received zero records")]
    EmptySplit { index: usize },
    #[error("fractions must be positive and sum to 1 (got sum {sum})")]
    InvalidFractions { sum: f64 },
    #[error("record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error("conditional distribution is degenerate at {at}: no survival mass remains")]
    DegenerateConditional { at: f64 },
    #[error(
        "optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})"
    )]
    NonConvergence { iterations: usize, grad_norm: f64 },
    #[error("record {index} has non-positive time {time}; survival times must be > 0")]
    ZeroTime { index: usize, time: f64 },
    #[error("conformal score set is empty: {0}")]
    EmptyConformalSet(String),
    #[error("no scores stored for level {level}")]
    EmptyLevel { level: f64 },
    #[error("no comparable pairs for the concordance index")]
    NoComparablePairs,
    #[error("group {index} has degenerate mean predicted probability {mean}")]
    DegenerateGroup { index: usize, mean: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
