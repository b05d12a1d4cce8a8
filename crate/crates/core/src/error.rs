use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("degenerate GMM fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate injection: {0}")]
    DegenerateInjection(String),

    /// A training run hit a non-finite loss or gradient. The entropy values
    /// recorded before the failure are kept for inspection.
    #[error("training aborted at iteration {iteration}: {reason}")]
    TrainingAborted {
        iteration: usize,
        reason: String,
        partial_trace: Vec<f64>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
