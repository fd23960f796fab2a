use thiserror::Error;

/// Errors raised by the qpmkit operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("outcome spaces do not match")]
    SpaceMismatch,

    #[error("invalid outcome space: {0}")]
    InvalidOutcomeSpace(String),

    #[error("effect {index} is not hermitian (asymmetry {asymmetry:.3e})")]
    EffectNotHermitian { index: usize, asymmetry: f64 },

    #[error("effect {index} is not positive (minimum eigenvalue {min_eigenvalue:.3e})")]
    EffectNotPsd { index: usize, min_eigenvalue: f64 },

    #[error("effects do not sum to the identity (deviation {deviation:.3e})")]
    SumNotIdentity { deviation: f64 },

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("C*-convex coefficients are not normalized (deviation {deviation:.3e})")]
    CoefficientsNotNormalized { deviation: f64 },

    #[error("certificate is infeasible: {0}")]
    CertificateInfeasible(String),

    #[error("Kraus operators are not normalized (deviation {deviation:.3e})")]
    KrausNotNormalized { deviation: f64 },

    #[error("certificate is not multiplicative on powers of psi: power {power} has error {error:.3e}")]
    NotMultiplicativeOnRationalAlgebra { power: usize, error: f64 },

    #[error("kernel {index} does not reproduce the measure (deviation {deviation:.3e})")]
    KernelDoesNotReproduceMeasure { index: usize, deviation: f64 },

    #[error("randomisation family is empty")]
    EmptyFamily,

    #[error("malformed input at {pointer}: {message}")]
    MalformedInput { pointer: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
