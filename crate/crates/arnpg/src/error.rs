use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or malformed input data.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A shape mismatch between tensors (policy vs MDP, reward vs MDP, ...).
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A runtime invariant (dual property, theorem bound) failed to hold.
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// A linear-programming solve ended without an optimal solution.
    #[error("linear program is {0}")]
    LpStatus(crate::oracle::LpStatus),
    /// I/O failure while reading or writing experiment files.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Malformed JSON document.
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    /// CSV read/write failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
