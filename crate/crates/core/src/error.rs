use thiserror::Error;

/// Errors raised by the clustering library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("center set is empty")]
    EmptyCenters,

    #[error("point index {index} out of range for dataset of {n} points")]
    PointOutOfRange { index: usize, n: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exhaustive search needs {subsets} subsets, budget is {budget}")]
    BudgetExceeded { subsets: u128, budget: u128 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("no-substitution violation: {0}")]
    StreamViolation(String),

    #[error("no {z}-linear bin division of {size} points exists")]
    NoLinearDivision { size: usize, z: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
