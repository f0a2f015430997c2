use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not orthogonal (residual {0:.3e})")]
    NotOrthogonal(f64),

    #[error("matrix is not antisymmetric (residual {0:.3e})")]
    NotAntisymmetric(f64),

    #[error("near-degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
