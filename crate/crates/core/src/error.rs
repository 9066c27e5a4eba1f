use thiserror::Error;

use crate::qp::QpStatus;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (symmetric part {0:.3e})")]
    NotSkew(f64),
    #[error("matrix is not an se(3) element: {0}")]
    NotSe3(&'static str),
    #[error("matrix is not a rotation (orthogonality defect {defect:.3e}, det {det:.6})")]
    NotRotation { defect: f64, det: f64 },
    #[error("inertia parameters invalid: {0}")]
    InvalidInertia(String),
    #[error("time step must be positive, got {0}")]
    InvalidDt(f64),
    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("QP solve failed with status {status:?} after {iterations} iterations")]
    QpFailed { status: QpStatus, iterations: usize },
    #[error("KKT factorization failed: zero pivot at column {0}")]
    Factorization(usize),
    #[error("unknown reference spec: {0}")]
    UnknownSpec(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
