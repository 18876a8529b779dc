//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [ensemble]
//! sizes = [20, 30]
//! samples = 100
//! degree = 3.0
//! seed = 1
//!
//! [sse]
//! beta_multiplier = 3.5
//! thermalization = 1000
//! measurement = 1000
//! grid_low = 0.02
//! grid_high = 0.98
//! replicas = 32
//!
//! [analysis]
//! bootstrap = 1000
//! ```
//!
//! Omitted keys take the defaults of the corresponding `Default` impls.
//! `thermalization` and `measurement` count exchange rounds; each round is
//! `sweeps_per_round` sweeps of every replica.

use qafid_core::estimators::LevelMode;
use qafid_core::exchange::LambdaGrid;
use qafid_core::hamiltonian::DEFAULT_PENALTY;
use qafid_core::instance::DEFAULT_SOLUTION_BUDGET;
use qafid_core::simulation::SimulationParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ExperimentError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub sse: SseSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub degree: f64,
    pub seed: u64,
    pub penalty: f64,
    pub solution_budget: usize,
    pub max_attempts: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            sizes: vec![12, 16, 20, 24, 30],
            samples: 100,
            degree: 3.0,
            seed: 1,
            penalty: DEFAULT_PENALTY,
            solution_budget: DEFAULT_SOLUTION_BUDGET,
            max_attempts: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SseSpec {
    pub beta_multiplier: f64,
    pub thermalization: u64,
    pub measurement: u64,
    pub sweeps_per_round: usize,
    pub grid_low: f64,
    pub grid_high: f64,
    pub replicas: usize,
    pub exchange: bool,
    pub level_mode: LevelMode,
    pub blocks: u64,
}

impl Default for SseSpec {
    fn default() -> Self {
        SseSpec {
            beta_multiplier: 3.5,
            thermalization: 100_000,
            measurement: 100_000,
            sweeps_per_round: 1,
            grid_low: 0.02,
            grid_high: 0.98,
            replicas: 32,
            exchange: true,
            level_mode: LevelMode::AllLevels,
            blocks: 32,
        }
    }
}

impl SseSpec {
    pub fn grid(&self) -> Result<LambdaGrid> {
        Ok(LambdaGrid::new(self.grid_low, self.grid_high, self.replicas)?)
    }

    /// Monte Carlo parameters for an `n`-vertex instance, `β = multiplier · n`.
    pub fn params_for(&self, n: usize) -> Result<SimulationParams> {
        let params = SimulationParams {
            beta: self.beta_multiplier * n as f64,
            lambdas: self.grid()?.points(),
            thermalization: self.thermalization,
            measurement: self.measurement,
            sweeps_per_round: self.sweeps_per_round,
            exchange: self.exchange,
            level_mode: self.level_mode,
            blocks: self.blocks,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitChoice {
    Stretched,
    Logarithmic,
    #[default]
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    pub bootstrap: usize,
    pub fit_model: FitChoice,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            bootstrap: 1000,
            fit_model: FitChoice::Both,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        let e = &self.ensemble;
        if e.sizes.is_empty() || e.sizes.contains(&0) {
            return bad("ensemble.sizes must be a non-empty list of positive sizes");
        }
        if e.samples == 0 || e.max_attempts == 0 || e.solution_budget == 0 {
            return bad("ensemble.samples, max_attempts and solution_budget must be positive");
        }
        for &n in &e.sizes {
            qafid_core::graph::validate_er_params(n, e.degree)?;
        }
        if !(e.penalty > 1.0 && e.penalty.is_finite()) {
            return bad("ensemble.penalty must exceed 1");
        }
        let s = &self.sse;
        if !(s.beta_multiplier > 0.0 && s.beta_multiplier.is_finite()) {
            return bad("sse.beta_multiplier must be positive");
        }
        if s.measurement == 0 || s.sweeps_per_round == 0 || s.blocks == 0 {
            return bad("sse.measurement, sweeps_per_round and blocks must be positive");
        }
        s.grid()?;
        if self.analysis.bootstrap < 2 {
            return bad("analysis.bootstrap must be at least 2");
        }
        Ok(())
    }

    /// Short content hash of the resolved configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[ensemble]\nsizes = [8]\nsamples = 4\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.ensemble.sizes, vec![8]);
        assert_eq!(cfg.ensemble.degree, 3.0);
        assert_eq!(cfg.sse.replicas, 32);
        assert_eq!(cfg.analysis.bootstrap, 1000);
        let p = cfg.sse.params_for(8).unwrap();
        assert_eq!(p.beta, 28.0);
        assert_eq!(p.lambdas.len(), 32);
    }

    #[test]
    fn roundtrip_preserves_hash() {
        let cfg = parse_config(MINIMAL).unwrap();
        let again = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        let mut other = cfg.clone();
        other.ensemble.seed += 1;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn rejects_invalid() {
        for text in [
            "[ensemble]\nsizes = []\n",
            "[ensemble]\nsizes = [8]\nsamples = 0\n",
            "[ensemble]\nsizes = [8]\n[sse]\ngrid_low = 0.0\n",
            "[ensemble]\nsizes = [8]\n[sse]\ngrid_high = 1.0\n",
            "[ensemble]\nsizes = [8]\n[analysis]\nbootstrap = 1\n",
            "[ensemble]\nsizes = [8]\nunknown = 3\n",
            "[ensemble]\nsizes = [8]\ndegree = 9.0\n",
            "not toml",
        ] {
            assert!(parse_config(text).is_err(), "{text}");
        }
    }
}
