use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("observable does not live on the generator's space")]
    SpaceMismatch,

    /// The observable is not representable in a truncated spectral basis.
    #[error("observable outside the spanned subspace (projection residual {residual:.3e})")]
    OutOfSpan { residual: f64 },

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("non-ergodic generator: spectral gap {gap:.3e} below threshold")]
    NonErgodic { gap: f64 },

    #[error("eigen-solver failure: {0}")]
    EigenSolver(String),

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
