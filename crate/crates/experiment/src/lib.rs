//! Ensemble orchestration and analysis on top of `qafid-core`.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod figures;
pub mod scaling;
pub mod store;

pub use config::{parse_config, ExperimentConfig};
pub use error::{ErrorClass, ExperimentError, Result};
pub use store::{EnsembleOptions, Store};
