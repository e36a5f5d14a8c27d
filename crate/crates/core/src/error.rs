use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("state space has {size} states, above the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: usize },

    #[error("no convergence after {iterations} iterations (span {final_span:e})")]
    NonConvergence { iterations: usize, final_span: f64 },

    #[error("{0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
