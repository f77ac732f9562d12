use thiserror::Error;

/// Errors produced by oracles, backends, estimators and the two-party harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsqError {
    #[error("vector has zero norm")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("relative estimate did not terminate within {cap} iterations")]
    NonterminationCap { cap: u32 },

    #[error("relative estimate of a norm failed: {0}")]
    RelativeEstimateFailed(Box<AsqError>),

    #[error("oversampling vector does not dominate the target at index {index}")]
    DominanceViolation { index: usize },

    #[error("sampling distance {actual} exceeds budget {budget}")]
    BudgetExceeded { actual: f64, budget: f64 },

    #[error("sampler failed {failures} consecutive times")]
    SamplerStarvation { failures: u32 },

    #[error("linear combination construction failed: {0}")]
    ConstructionFailed(String),

    #[error("state is not normalized (norm^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("vector norm exceeds one (norm^2 = {norm_sq})")]
    NotSubnormalized { norm_sq: f64 },

    #[error("dimension {dim} is not a power of two")]
    DimensionNotPowerOfTwo { dim: usize },

    #[error("expected a unit-norm vector, got norm {norm}")]
    NonUnitNorm { norm: f64 },

    #[error("malformed frame: {0}")]
    MalformedFrame(String),

    #[error("session aborted: {0}")]
    SessionAbort(String),

    #[error("remote party reported error {code}: {message}")]
    Remote { code: u32, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for AsqError {
    fn from(err: std::io::Error) -> Self {
        AsqError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for AsqError {
    fn from(err: serde_json::Error) -> Self {
        AsqError::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AsqError>;
