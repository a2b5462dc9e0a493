use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("time {t} precedes the initial time {t0}")]
    BeforeInitialTime { t: f64, t0: f64 },
    #[error("point (x={x}, t={t}) lies outside the domain")]
    OutsideDomain { x: f64, t: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("cross-formula residual {residual:e} exceeds tolerance {tolerance:e}")]
    CrossFormula { residual: f64, tolerance: f64 },
    #[error("conjugate gradients did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, WaveError>;
