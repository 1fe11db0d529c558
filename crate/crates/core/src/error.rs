use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("invalid face: {0}")]
    InvalidFace(String),

    #[error("singular element: eigenvalue {eigenvalue:e} below rank threshold")]
    SingularElement { eigenvalue: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("direction is not in the dual face: eigenvalue {min_eigenvalue:e}")]
    NotInDual { min_eigenvalue: f64 },

    #[error("infeasible affine system (residual {residual:e})")]
    InfeasibleAffine { residual: f64 },

    #[error("infeasible problem: projection gap stalled at {gap:e}")]
    InfeasibleProblem { gap: f64 },

    #[error("certificate unavailable: reduction chain hit its step cap before regularizing")]
    CertificateUnavailable,

    #[error("iteration budget exhausted (gap {gap:e})")]
    BudgetExhausted { gap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
