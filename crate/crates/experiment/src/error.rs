use thiserror::Error;

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Core(#[from] qafid_core::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient samples: need at least {need}, got {have}")]
    InsufficientSamples { need: usize, have: usize },

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("result store: {0}")]
    Store(String),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Runtime,
    Budget,
}

impl ExperimentError {
    pub fn class(&self) -> ErrorClass {
        use qafid_core::Error as E;
        match self {
            ExperimentError::Core(e) if e.is_budget() => ErrorClass::Budget,
            ExperimentError::Core(E::Io(_)) => ErrorClass::Runtime,
            ExperimentError::Core(_)
            | ExperimentError::Config(_)
            | ExperimentError::InsufficientSamples { .. }
            | ExperimentError::Toml(_)
            | ExperimentError::Csv(_)
            | ExperimentError::Json(_) => ErrorClass::Validation,
            ExperimentError::FitDiverged(_) | ExperimentError::Store(_) | ExperimentError::Io(_) => {
                ErrorClass::Runtime
            }
        }
    }
}
