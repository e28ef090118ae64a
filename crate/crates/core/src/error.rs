use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |H - H^dagger| = {residual:e} exceeds {tolerance:e}")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("trace is not one: |Tr(rho) - 1| = {residual:e} exceeds {tolerance:e}")]
    TraceNotOne { residual: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e} below {tolerance:e}")]
    NotPositive { min_eigenvalue: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("density matrix carries no bipartite factorization")]
    MissingFactorization,

    #[error("every step was skipped by the eps = {eps:e} denominator guard")]
    AllStepsSkipped { eps: f64 },

    #[error("non-finite entry produced by {operation}")]
    NonFinite { operation: &'static str },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
