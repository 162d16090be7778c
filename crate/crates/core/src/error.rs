use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("matrix has a negative eigenvalue {0:e}")]
    Indefinite(f64),

    #[error("Jacobi eigen-iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A parameter-regime inequality required by a construction does not hold.
    #[error("regime violated: {0}")]
    Regime(String),

    #[error("run aborted at step {step}: {reason} (|g| = {grad_norm:e})")]
    Diverged { step: usize, grad_norm: f64, reason: String },

    #[error("config error at line {line}, field `{field}`: {message}")]
    Config { line: usize, field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }
}
