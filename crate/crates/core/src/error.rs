use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{0}: iteration failed to converge")]
    NoConvergence(&'static str),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix asymmetry {defect:.3e} exceeds tolerance {tol:.1e}")]
    Asymmetric { defect: f64, tol: f64 },

    #[error("eigenvalue within {tol:.3e} of the imaginary axis (selected {selected} of {wanted})")]
    ImaginaryAxisEigenvalue { selected: usize, wanted: usize, tol: f64 },

    #[error("invariant subspace residual {residual:.3e} above {tol:.1e}")]
    Residual { residual: f64, tol: f64 },

    #[error("Hamiltonian matrix has an eigenvalue on the imaginary axis (gap {gap:.3e})")]
    NotAdmissible { gap: f64 },

    #[error("no positive definite Riccati solution (candidate inertia: {positive} positive, {negative} negative, {zero} zero)")]
    NoPdSolution {
        positive: usize,
        negative: usize,
        zero: usize,
    },

    #[error("graph subspace basis is ill-conditioned (cond {cond:.3e} > {limit:.1e})")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("pair (A, B) is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("no admissible alpha in grid {grid:?}")]
    NoAdmissibleAlpha { grid: Vec<f64> },

    #[error("controller J_c skewness defect {defect:.3e} exceeds {tol:.1e}")]
    SkewnessDefect { defect: f64, tol: f64 },

    #[error("no epsilon down to {floor:.1e} gives a positive definite KYP right-hand side")]
    CertificateFailure { floor: f64 },

    #[error("boundary pairing matrix is singular")]
    SingularPairing,

    #[error("implicit midpoint operator is singular; reduce dt")]
    SingularMidpoint,

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("plant order {plant} differs from controller order {controller}")]
    OrderMismatch { plant: usize, controller: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
