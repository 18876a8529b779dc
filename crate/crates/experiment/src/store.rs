//! Content-addressed result store and the ensemble runner.
//!
//! Layout under `root/<config hash>/`:
//!
//! ```text
//! config.toml            resolved configuration
//! manifest.json          index of finished instances
//! instances/<id>.json    graph + unique answer
//! records/<id>.csv       per-λ estimates of one instance
//! diagnostics/<id>.json  generation and exchange statistics
//! checkpoints/<id>.json  in-flight Monte Carlo state (removed when done)
//! ```
//!
//! Instance ids are `n{N}-s{sample}-{seed}`, so a file name pins both the
//! configuration (through the directory) and the instance seed. Result files
//! are written once; an existing file with different content is an error.

use std::fs;
use std::path::{Path, PathBuf};

use qafid_core::estimators::{parse_rows, write_rows, ResultRow};
use qafid_core::hamiltonian::build_problem;
use qafid_core::instance::{generate_unique_instance, GenerationStats, InstanceFile, MisInstance};
use qafid_core::rng::derive_seed;
use qafid_core::simulation::{parse_checkpoint, PairedRun, RunDiagnostics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};

/// Label separating the Monte Carlo seed from the instance seed path.
const RUN_LABEL: u64 = 0x0053_5345_5f52_554e;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn instance_id(n: usize, sample: usize, seed: u64) -> String {
    format!("n{n:03}-s{sample:04}-{seed:016x}")
}

/// Writes `bytes` to `path` unless it exists. Returns `false` when an
/// identical file was already there.
pub fn write_once(path: &Path, bytes: &[u8]) -> Result<bool> {
    if path.exists() {
        return if fs::read(path)? == bytes {
            Ok(false)
        } else {
            Err(ExperimentError::Store(format!(
                "{} exists with different content; refusing to overwrite",
                path.display()
            )))
        };
    }
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes)?;
    let linked = fs::hard_link(&tmp, path);
    fs::remove_file(&tmp)?;
    match linked {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => write_once(path, bytes),
        Err(e) => Err(e.into()),
    }
}

/// Atomically replaces `path` (used for the manifest and checkpoints).
pub fn write_replace(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("file");
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

/// Per-instance diagnostics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDiagnostics {
    pub id: String,
    pub n: usize,
    pub sample: usize,
    pub instance_seed: u64,
    pub run_seed: u64,
    pub mis_size: usize,
    pub added_edges: usize,
    pub generation: GenerationStats,
    pub run: RunDiagnostics,
    pub min_acceptance: Option<f64>,
    pub mean_acceptance: Option<f64>,
}

fn acceptance_summary(run: &RunDiagnostics) -> (Option<f64>, Option<f64>) {
    let rates: Vec<f64> = run
        .pairs
        .iter()
        .flatten()
        .filter(|p| p.attempts > 0)
        .map(|p| p.rate())
        .collect();
    if rates.is_empty() {
        return (None, None);
    }
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    (Some(min), Some(rates.iter().sum::<f64>() / rates.len() as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub n: usize,
    pub sample: usize,
    pub instance_seed: u64,
    pub run_seed: u64,
    pub generation_attempts: usize,
    pub min_acceptance: Option<f64>,
    pub mean_acceptance: Option<f64>,
    pub round_trips: u64,
    pub low_acceptance_pairs: usize,
}

impl From<&InstanceDiagnostics> for ManifestEntry {
    fn from(d: &InstanceDiagnostics) -> Self {
        ManifestEntry {
            id: d.id.clone(),
            n: d.n,
            sample: d.sample,
            instance_seed: d.instance_seed,
            run_seed: d.run_seed,
            generation_attempts: d.generation.attempts,
            min_acceptance: d.min_acceptance,
            mean_acceptance: d.mean_acceptance,
            round_trips: d.run.round_trips,
            low_acceptance_pairs: d.run.low_acceptance.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub instances: Vec<ManifestEntry>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EnsembleOptions {
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// Rounds between checkpoints of each running instance.
    pub checkpoint_every: Option<u64>,
}

/// Handle on one configuration's directory.
#[derive(Clone, Debug)]
pub struct Store {
    dir: PathBuf,
    config: ExperimentConfig,
}

impl Store {
    /// Creates or reopens the directory for `config` under `root`.
    pub fn open(root: &Path, config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let dir = root.join(config.hash());
        for sub in ["instances", "records", "diagnostics", "checkpoints"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        write_once(&dir.join("config.toml"), config.to_toml().as_bytes())?;
        Ok(Store {
            dir,
            config: config.clone(),
        })
    }

    /// Opens an existing store directory, reading its configuration.
    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("config.toml"))?;
        let config = crate::config::parse_config(&text)?;
        if dir.file_name().and_then(|s| s.to_str()) != Some(config.hash().as_str()) {
            return Err(ExperimentError::Store(format!(
                "{} does not match its config hash {}",
                dir.display(),
                config.hash()
            )));
        }
        Ok(Store {
            dir: dir.to_path_buf(),
            config,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    fn path(&self, sub: &str, id: &str, ext: &str) -> PathBuf {
        self.dir.join(sub).join(format!("{id}.{ext}"))
    }

    /// Generates, simulates and stores every (size, sample) pair not yet
    /// present, then rewrites the manifest.
    pub fn run_ensemble(&self, opts: &EnsembleOptions) -> Result<Manifest> {
        let tasks: Vec<(usize, usize)> = self
            .config
            .ensemble
            .sizes
            .iter()
            .flat_map(|&n| (0..self.config.ensemble.samples).map(move |s| (n, s)))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| ExperimentError::Store(e.to_string()))?;
        let done: Vec<InstanceDiagnostics> = pool.install(|| {
            tasks
                .par_iter()
                .map(|&(n, s)| self.run_one(n, s, opts))
                .collect::<Result<_>>()
        })?;
        let manifest = Manifest {
            version: VERSION.to_string(),
            config_hash: self.config.hash(),
            config: self.config.clone(),
            instances: done.iter().map(ManifestEntry::from).collect(),
        };
        write_replace(
            &self.dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )?;
        Ok(manifest)
    }

    fn run_one(&self, n: usize, sample: usize, opts: &EnsembleOptions) -> Result<InstanceDiagnostics> {
        let e = &self.config.ensemble;
        let mut generation = GenerationStats::default();
        let inst = generate_unique_instance(
            n,
            e.degree,
            e.seed,
            sample as u64,
            e.solution_budget,
            e.max_attempts,
            &mut generation,
        )?;
        let id = instance_id(n, sample, inst.seed);
        let diag_path = self.path("diagnostics", &id, "json");
        if self.path("records", &id, "csv").exists() && diag_path.exists() {
            log::info!("{id}: already stored");
            return Ok(serde_json::from_slice(&fs::read(&diag_path)?)?);
        }
        write_once(
            &self.path("instances", &id, "json"),
            InstanceFile::from_instance(&inst).to_json().as_bytes(),
        )?;
        let run_seed = derive_seed(e.seed, &[n as u64, sample as u64, RUN_LABEL]);
        let run = self.simulate(&inst, &id, run_seed, opts)?;

        let mut csv = Vec::new();
        write_rows(&mut csv, &run.record().rows())?;
        let diagnostics = run.diagnostics();
        let (min_acceptance, mean_acceptance) = acceptance_summary(&diagnostics);
        if !diagnostics.low_acceptance.is_empty() {
            log::warn!(
                "{id}: exchange acceptance below threshold at {} pair(s)",
                diagnostics.low_acceptance.len()
            );
        }
        let diag = InstanceDiagnostics {
            id: id.clone(),
            n,
            sample,
            instance_seed: inst.seed,
            run_seed,
            mis_size: inst.mis_size,
            added_edges: inst.added_edges,
            generation,
            run: diagnostics,
            min_acceptance,
            mean_acceptance,
        };
        write_once(&self.path("records", &id, "csv"), &csv)?;
        write_once(&diag_path, serde_json::to_string_pretty(&diag)?.as_bytes())?;
        let ckpt = self.path("checkpoints", &id, "json");
        if ckpt.exists() {
            fs::remove_file(ckpt)?;
        }
        log::info!("{id}: done");
        Ok(diag)
    }

    fn simulate(
        &self,
        inst: &MisInstance,
        id: &str,
        seed: u64,
        opts: &EnsembleOptions,
    ) -> Result<PairedRun> {
        let h = build_problem(&inst.graph, self.config.ensemble.penalty)?;
        let params = self.config.sse.params_for(inst.n())?;
        let ckpt = self.path("checkpoints", id, "json");
        let mut run = if ckpt.exists() {
            log::info!("{id}: resuming from checkpoint");
            PairedRun::restore(&h, parse_checkpoint(&fs::read(&ckpt)?)?)?
        } else {
            PairedRun::new(&h, Some(&inst.answer_spins()), &params, seed, id)?
        };
        let step = opts.checkpoint_every.unwrap_or(u64::MAX).max(1);
        while !run.advance(step) {
            write_replace(&ckpt, &serde_json::to_vec(&run.snapshot())?)?;
        }
        Ok(run)
    }

    /// Stored instance `id`.
    pub fn instance(&self, id: &str) -> Result<MisInstance> {
        let bytes = fs::read(self.path("instances", id, "json"))?;
        Ok(qafid_core::instance::parse_instance_file(&bytes)?.instance()?)
    }

    /// Every stored instance, ordered by id.
    pub fn results(&self) -> Result<Vec<InstanceResult>> {
        let mut ids: Vec<String> = fs::read_dir(self.dir.join("records"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".csv").map(str::to_string)
            })
            .filter(|id| !id.starts_with('.'))
            .collect();
        ids.sort();
        ids.iter()
            .map(|id| {
                let rows = parse_rows(&fs::read(self.path("records", id, "csv"))?)?;
                let diag: InstanceDiagnostics =
                    serde_json::from_slice(&fs::read(self.path("diagnostics", id, "json"))?)?;
                Ok(InstanceResult {
                    id: id.clone(),
                    n: diag.n,
                    rows,
                })
            })
            .collect()
    }
}

/// Stored estimates of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceResult {
    pub id: String,
    pub n: usize,
    pub rows: Vec<ResultRow>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_once_refuses_changes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        assert!(write_once(&p, b"x").unwrap());
        assert!(!write_once(&p, b"x").unwrap());
        assert!(write_once(&p, b"y").is_err());
        assert_eq!(fs::read(&p).unwrap(), b"x");
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn ids_sort_by_size_then_sample() {
        let mut ids = vec![instance_id(20, 3, 9), instance_id(8, 10, 1), instance_id(8, 2, 5)];
        ids.sort();
        assert_eq!(ids, vec![instance_id(8, 2, 5), instance_id(8, 10, 1), instance_id(20, 3, 9)]);
    }
}
