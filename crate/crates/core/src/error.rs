use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("CFL violation: dt = {dt} exceeds dx / v_max = {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("linear solve did not converge: residual {residual:e} > tolerance {tolerance:e}")]
    LinearSolve { residual: f64, tolerance: f64 },

    #[error("ellipticity violated at (t, x, v) = {point:?}: eigenvalues [{min_eig}, {max_eig}] outside [{lower}, {upper}]")]
    Ellipticity {
        point: Vec<f64>,
        min_eig: f64,
        max_eig: f64,
        lower: f64,
        upper: f64,
    },

    #[error("region not covered by the grid: {0}")]
    Coverage(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
