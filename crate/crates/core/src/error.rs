use thiserror::Error;

/// Errors raised by the matrix-space samplers and their supporting numerics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not positive definite (smallest eigenvalue {min:e}, largest {max:e})")]
    NotPositiveDefinite { min: f64, max: f64 },

    #[error("matrix is rank deficient")]
    RankDeficient,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("reference measure mismatch: kernel needs {expected}, target is tagged {found}")]
    ReferenceMismatch { expected: String, found: String },

    #[error("log-density is not finite at the current state ({0})")]
    NonFiniteTarget(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
