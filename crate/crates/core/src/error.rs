use thiserror::Error;

/// Errors produced by the risk-averse learning toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty sample batch")]
    EmptyBatch,
    #[error("non-finite sample")]
    NonFiniteSample,
    #[error("invalid risk level: must lie in (0, 1], got {0}")]
    InvalidRiskLevel(f64),
    #[error("invalid cost bound: must be positive and finite, got {0}")]
    InvalidCostBound(f64),
    #[error("first-order estimator requires gradients")]
    MissingGradients,
    #[error("gradient count {grads} does not match cost count {costs}")]
    GradientCountMismatch { costs: usize, grads: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("smoothing radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("smoothing radius exceeds inscribed radius")]
    RadiusExceedsInscribed { delta: f64, inscribed: f64 },
    #[error("invalid feasible set: {0}")]
    InvalidSet(String),
    #[error("grid oracle limited to low dimension")]
    DimensionTooLarge(usize),
    #[error("unsupported noise law for quadrature: {0}")]
    UnsupportedNoise(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time step {t} outside horizon 1..={horizon}")]
    StepOutOfRange { t: usize, horizon: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
