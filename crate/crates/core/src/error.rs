use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("solver breakdown: {0}")]
    Breakdown(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("rejected coefficient: {0}")]
    RejectedCoefficient(String),

    #[error("penalty {given} below admissible minimum {minimum}")]
    PenaltyTooSmall { given: f64, minimum: f64 },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable category used by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension",
            Error::InvalidInput(_) => "input",
            Error::NotPositiveDefinite(_) => "not-spd",
            Error::Breakdown(_) => "breakdown",
            Error::NonFinite(_) => "non-finite",
            Error::RejectedCoefficient(_) => "coefficient",
            Error::PenaltyTooSmall { .. } => "penalty",
            Error::Parse { .. } => "parse",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
