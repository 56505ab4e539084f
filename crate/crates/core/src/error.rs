use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("nilpotency step {step} exceeds the supported maximum of 4")]
    UnsupportedStep { step: usize },

    #[error("algebra is not nilpotent")]
    NotNilpotent,

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("square root is not exact in this coefficient field")]
    InexactSqrt,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("stochastic representation not applicable: {0}")]
    RepresentationInapplicable(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistency(String),

    #[error("heat kernel provider failed at ({0})")]
    ProviderFailure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
