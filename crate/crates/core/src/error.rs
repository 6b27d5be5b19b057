use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("field length {found} does not match basis size {expected}")]
    Mismatch { expected: usize, found: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("kernel rejected: {0}")]
    InvalidKernel(String),
    #[error("kernel mass diverges (power-decay exponent {exponent} must exceed 1)")]
    DivergentMass { exponent: f64 },
    #[error("source exponent p = {0} outside [1, 6)")]
    ExponentOutOfRange(f64),
    #[error("unsupported Lebesgue exponent q = {0}")]
    UnsupportedExponent(f64),
    #[error("regularization parameter must be nonnegative, got {0}")]
    NegativeRegularization(f64),
    #[error("past history not evaluable at t = {0}")]
    PastNotEvaluable(f64),
    #[error("time step {dt} differs from history spacing {ds}")]
    StepMismatch { dt: f64, ds: f64 },
    #[error("trajectory has no sample at t = {0}")]
    TrajectoryGap(f64),
    #[error("resolvent did not converge: residual {residual:e} after {iterations} iterations")]
    ResolventDiverged { residual: f64, iterations: usize },
    #[error("test function violates the admissible class: {0}")]
    InvalidTestFunction(String),
}

pub type Result<T> = std::result::Result<T, Error>;
