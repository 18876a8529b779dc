//! Paired replica-exchange runs on one instance.
//!
//! Two independent stacks cover the same grid; every measurement round
//! takes one configuration sample from each stack at each grid point and
//! their overlap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    overlap, sample_configuration, LambdaAccumulator, LevelMode, MeasurementRecord,
};
use crate::exchange::{PairStats, ReplicaSet, ReplicaSnapshot};
use crate::hamiltonian::ProblemHamiltonian;
use crate::rng::{derive_seed, stream, McRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub beta: f64,
    pub lambdas: Vec<f64>,
    /// Rounds discarded before measuring.
    pub thermalization: u64,
    /// Measured rounds.
    pub measurement: u64,
    /// Sweeps of every replica per round.
    pub sweeps_per_round: usize,
    pub exchange: bool,
    pub level_mode: LevelMode,
    /// Target number of jackknife blocks.
    pub blocks: u64,
}

impl SimulationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.lambdas.is_empty() {
            return bad("empty lambda grid".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return bad(format!("grid point {l} outside (0, 1)"));
        }
        if self.measurement == 0 || self.sweeps_per_round == 0 || self.blocks == 0 {
            return bad("measurement rounds, sweeps per round and blocks must be positive".into());
        }
        Ok(())
    }

    fn rounds_per_block(&self) -> u64 {
        (self.measurement / self.blocks).max(1)
    }
}

/// Exchange statistics of both stacks after a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub pairs: [Vec<PairStats>; 2],
    pub low_acceptance: Vec<usize>,
    pub round_trips: u64,
    pub max_cutoff: usize,
}

#[derive(Clone, Debug)]
pub struct PairedRun {
    params: SimulationParams,
    answer: Option<Vec<i8>>,
    stacks: [ReplicaSet; 2],
    record: MeasurementRecord,
    rng: McRng,
    rounds_done: u64,
}

impl PairedRun {
    pub fn new(
        h: &ProblemHamiltonian,
        answer: Option<&[i8]>,
        params: &SimulationParams,
        seed: u64,
        instance_id: &str,
    ) -> Result<Self> {
        params.validate()?;
        if let Some(a) = answer {
            if a.len() != h.n() {
                return Err(Error::InvalidInstance("answer length differs from N".into()));
            }
        }
        let mut stacks = [
            ReplicaSet::new(h, &params.lambdas, params.beta, derive_seed(seed, &[0]))?,
            ReplicaSet::new(h, &params.lambdas, params.beta, derive_seed(seed, &[1]))?,
        ];
        for s in &mut stacks {
            s.set_exchange(params.exchange);
        }
        let points = (0..params.lambdas.len())
            .map(|r| {
                let t = stacks[0].table(r);
                LambdaAccumulator::new(t.lambda(), t.constant(), params.beta, params.rounds_per_block())
            })
            .collect();
        Ok(PairedRun {
            params: params.clone(),
            answer: answer.map(<[i8]>::to_vec),
            stacks,
            record: MeasurementRecord {
                instance_id: instance_id.to_string(),
                n_sites: h.n(),
                points,
            },
            rng: stream(seed, &[2]),
            rounds_done: 0,
        })
    }

    pub fn total_rounds(&self) -> u64 {
        self.params.thermalization + self.params.measurement
    }

    pub fn rounds_done(&self) -> u64 {
        self.rounds_done
    }

    pub fn is_done(&self) -> bool {
        self.rounds_done >= self.total_rounds()
    }

    pub fn record(&self) -> &MeasurementRecord {
        &self.record
    }

    /// Runs at most `rounds` further rounds; returns whether the run is complete.
    pub fn advance(&mut self, rounds: u64) -> bool {
        let end = self.rounds_done.saturating_add(rounds).min(self.total_rounds());
        while self.rounds_done < end {
            let thermalizing = self.rounds_done < self.params.thermalization;
            for s in &mut self.stacks {
                s.emc_round(self.params.sweeps_per_round, thermalizing);
            }
            if !thermalizing {
                self.measure();
            }
            self.rounds_done += 1;
        }
        self.is_done()
    }

    fn measure(&mut self) {
        let n = self.record.n_sites;
        let ones = vec![1i8; n];
        let answer = self.answer.as_deref().unwrap_or(&ones);
        for r in 0..self.record.points.len() {
            let mut pair = [0, 1].map(|k| {
                let set = &self.stacks[k];
                sample_configuration(
                    set.state(r),
                    set.table(r),
                    answer,
                    self.params.level_mode,
                    &mut self.rng,
                )
            });
            if self.answer.is_none() {
                for s in &mut pair {
                    s.p_ans = f64::NAN;
                }
            }
            let q = (n > 0).then(|| overlap(&pair[0].magnetization, &pair[1].magnetization));
            self.record.points[r].record(&[&pair[0], &pair[1]], q);
        }
    }

    pub fn diagnostics(&self) -> RunDiagnostics {
        let mut low: Vec<usize> = self
            .stacks
            .iter()
            .flat_map(|s| s.low_acceptance_pairs())
            .collect();
        low.sort_unstable();
        low.dedup();
        RunDiagnostics {
            pairs: [
                self.stacks[0].pair_stats().to_vec(),
                self.stacks[1].pair_stats().to_vec(),
            ],
            low_acceptance: low,
            round_trips: self.stacks.iter().map(ReplicaSet::round_trips).sum(),
            max_cutoff: self
                .stacks
                .iter()
                .flat_map(|s| (0..s.len()).map(|r| s.state(r).cutoff()))
                .max()
                .unwrap_or(0),
        }
    }

    pub fn snapshot(&self) -> RunSnapshot {
        RunSnapshot {
            params: self.params.clone(),
            answer: self.answer.clone(),
            stacks: [self.stacks[0].snapshot(), self.stacks[1].snapshot()],
            record: self.record.clone(),
            rng: self.rng.clone(),
            rounds_done: self.rounds_done,
        }
    }

    pub fn restore(h: &ProblemHamiltonian, snap: RunSnapshot) -> Result<Self> {
        snap.params
            .validate()
            .map_err(|e| Error::InvalidCheckpoint(e.to_string()))?;
        if snap.record.n_sites != h.n()
            || snap.record.points.len() != snap.params.lambdas.len()
            || snap.answer.as_ref().is_some_and(|a| a.len() != h.n())
        {
            return Err(Error::InvalidCheckpoint("checkpoint does not match instance".into()));
        }
        let [a, b] = snap.stacks;
        let stacks = [ReplicaSet::restore(h, a)?, ReplicaSet::restore(h, b)?];
        if stacks.iter().any(|s| s.lambdas() != snap.params.lambdas) {
            return Err(Error::InvalidCheckpoint("stack grid differs from parameters".into()));
        }
        Ok(PairedRun {
            params: snap.params,
            answer: snap.answer,
            stacks,
            record: snap.record,
            rng: snap.rng,
            rounds_done: snap.rounds_done,
        })
    }
}

/// Serializable state of a [`PairedRun`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSnapshot {
    pub params: SimulationParams,
    pub answer: Option<Vec<i8>>,
    pub stacks: [ReplicaSnapshot; 2],
    pub record: MeasurementRecord,
    pub rng: McRng,
    pub rounds_done: u64,
}

/// Parses a checkpoint file.
pub fn parse_checkpoint(bytes: &[u8]) -> Result<RunSnapshot> {
    serde_json::from_slice(bytes).map_err(|e| Error::InvalidCheckpoint(e.to_string()))
}

/// Runs to completion.
pub fn run_instance(
    h: &ProblemHamiltonian,
    answer: Option<&[i8]>,
    params: &SimulationParams,
    seed: u64,
    instance_id: &str,
) -> Result<(MeasurementRecord, RunDiagnostics)> {
    let mut run = PairedRun::new(h, answer, params, seed, instance_id)?;
    run.advance(u64::MAX);
    Ok((run.record.clone(), run.diagnostics()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::hamiltonian::build_problem;

    fn params() -> SimulationParams {
        SimulationParams {
            beta: 4.0,
            lambdas: vec![0.2, 0.5, 0.8],
            thermalization: 20,
            measurement: 40,
            sweeps_per_round: 1,
            exchange: true,
            level_mode: LevelMode::AllLevels,
            blocks: 8,
        }
    }

    #[test]
    fn checkpoint_resume_matches_straight_run() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let h = build_problem(&g, 2.0).unwrap();
        let answer = [1, -1, 1];
        let (full, _) = run_instance(&h, Some(&answer), &params(), 7, "x").unwrap();
        let mut run = PairedRun::new(&h, Some(&answer), &params(), 7, "x").unwrap();
        run.advance(25);
        let json = serde_json::to_vec(&run.snapshot()).unwrap();
        let mut resumed = PairedRun::restore(&h, parse_checkpoint(&json).unwrap()).unwrap();
        assert!(resumed.advance(u64::MAX));
        assert_eq!(resumed.record(), &full);
        assert_eq!(full.points[0].samples(), 80);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = params();
        p.lambdas = vec![0.0, 0.5];
        assert!(p.validate().is_err());
        let mut p = params();
        p.measurement = 0;
        assert!(p.validate().is_err());
        assert!(parse_checkpoint(b"{}").is_err());
    }
}
