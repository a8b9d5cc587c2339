//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by model construction, estimation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension bookkeeping violated (non-positive counts, shape mismatch).
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    /// The dataset is too small for the requested model order.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Numerical failure: singular or indefinite matrix, non-monotone EM.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category, used by the CLI error line and
    /// mapped onto process exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidDims(_) | Error::Infeasible(_) => "data",
            Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => "data",
            Error::Numerical(_) => "numerical",
        }
    }
}
