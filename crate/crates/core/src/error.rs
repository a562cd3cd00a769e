use thiserror::Error;

/// Errors raised by the library. Contract violations (dimension or level
/// mismatches) and numeric failures (explosion, non-PSD covariance) share
/// one enum so callers can match on the handful of recoverable cases.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("truncation level mismatch: {left} vs {right}")]
    LevelMismatch { left: usize, right: usize },
    #[error("unsupported truncation level {0} (must be in 1..=3)")]
    UnsupportedLevel(usize),
    #[error("Hurst parameter {0} outside the supported range")]
    InvalidHurst(f64),
    #[error("Hoelder exponent {0} outside the supported range")]
    InvalidAlpha(f64),
    #[error("time grid must be strictly increasing")]
    NonMonotoneGrid,
    #[error("index {index} out of range ({len} entries)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("signal is already time-augmented")]
    AlreadyAugmented,
    #[error("signal is not time-augmented")]
    NotAugmented,
    #[error("covariance matrix not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error(
        "derivative oracle of order {order} unavailable and finite-difference fallback disabled"
    )]
    MissingDerivativeOracle { order: usize },
    #[error("state norm {norm:.3e} exceeded the explosion bound at step {step} (t = {time})")]
    Explosion { step: usize, time: f64, norm: f64 },
    #[error("non-finite state at step {step} (t = {time})")]
    NonFiniteState { step: usize, time: f64 },
    #[error("dissection time {time} is not on the drive grid")]
    GridMismatch { time: f64 },
    #[error("projection did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    ProjectionStalled { sweeps: usize, residual: f64 },
    #[error("point is not within tolerance of the body (distance {distance:.3e})")]
    PointNotOnBody { distance: f64 },
    #[error("vector field returned a non-finite value")]
    NonFiniteField,
    #[error("invalid convex body: {0}")]
    InvalidBody(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty admissible time window for the scaling statistic")]
    EmptyWindow,
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
