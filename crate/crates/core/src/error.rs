use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid Hurst index {0}: must lie in the open interval (1/2, 1)")]
    InvalidHurst(f64),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("{0} is not a grid point")]
    NotGridPoint(f64),

    #[error("Cholesky factorisation failed after jitter retries (dimension {0})")]
    Cholesky(usize),

    #[error("non-finite state at step {step} (particle {particle})")]
    NonFinite { step: usize, particle: usize },

    #[error("empirical measures have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("degenerate regression: {0}")]
    DegenerateFit(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown model id `{0}`")]
    UnknownModel(String),

    #[error("invalid kernel table file: {0}")]
    KernelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
