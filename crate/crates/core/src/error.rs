use thiserror::Error;

/// Errors raised by measure construction, transport, and flow routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input: a measure needs at least one atom")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate at atom {atom}, axis {axis}")]
    NonFiniteCoordinate { atom: usize, axis: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("measures have different atom counts: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("brute force limited to {max} atoms, got {n}")]
    TooLarge { n: usize, max: usize },

    /// Two assignments are optimal up to the tie tolerance.
    #[error("optimal assignment is not unique (cost gap {gap:e})")]
    NonUniqueOptimum { gap: f64 },

    #[error("interpolation parameter {0} outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("invalid based plan: {0}")]
    InvalidPlan(String),

    #[error("functional evaluation failed: {0}")]
    EvaluationError(String),

    #[error("time step {tau} must be below 1/lambda^- = {limit}")]
    StepTooLarge { tau: f64, limit: f64 },

    #[error("proximal solver did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("reference integrator did not converge: step-doubling difference {difference:e}")]
    IntegratorNotConverged { difference: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
