use thiserror::Error;

use crate::instance::DiscardReason;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("solution budget exceeded: more than {budget} maximum independent sets")]
    BudgetExceeded { budget: usize },

    #[error("recursion budget exceeded after {steps} solver steps")]
    RecursionBudgetExceeded { steps: u64 },

    #[error("system size {n} exceeds the limit of {max}")]
    SizeTooLarge { n: usize, max: usize },

    #[error("instance discarded: {0}")]
    Discarded(DiscardReason),

    #[error("replica mismatch: {0}")]
    ReplicaMismatch(String),

    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by an exhausted work budget rather than by
    /// bad input or a runtime fault.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::BudgetExceeded { .. } | Error::RecursionBudgetExceeded { .. }
        )
    }
}
