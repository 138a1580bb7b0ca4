use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which CR3BP primary a singular radius refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primary {
    Larger,
    Smaller,
}

impl std::fmt::Display for Primary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Primary::Larger => f.write_str("larger (index 1)"),
            Primary::Smaller => f.write_str("smaller (index 2)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("state is coincident with the {0} primary")]
    SingularRadius(Primary),

    #[error("integration failed after reaching t = {t_last}: {reason}")]
    IntegrationFailure { t_last: f64, reason: String },

    #[error("propagation of sample {index} failed: {reason}")]
    SamplePropagation { index: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
