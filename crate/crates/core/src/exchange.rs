//! Replica exchange over a uniform `λ` grid.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{build_operator_table, OperatorTable, ProblemHamiltonian};
use crate::rng::{stream, McRng};
use crate::sse::{SseSnapshot, SseState, SweepStats};

/// Pairs accepting fewer exchanges than this are flagged.
pub const LOW_ACCEPTANCE: f64 = 0.05;

/// `R` equidistant points on `[low, high]` with `0 < low < high < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub low: f64,
    pub high: f64,
    pub replicas: usize,
}

impl LambdaGrid {
    pub fn new(low: f64, high: f64, replicas: usize) -> Result<Self> {
        if !(low > 0.0 && high < 1.0 && low < high) {
            return Err(Error::InvalidParameter(format!(
                "grid bounds must satisfy 0 < low < high < 1, got [{low}, {high}]"
            )));
        }
        if replicas == 0 {
            return Err(Error::InvalidParameter("grid needs at least one point".into()));
        }
        Ok(LambdaGrid { low, high, replicas })
    }

    pub fn spacing(&self) -> f64 {
        if self.replicas > 1 {
            (self.high - self.low) / (self.replicas - 1) as f64
        } else {
            0.0
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.replicas)
            .map(|r| self.low + r as f64 * self.spacing())
            .collect()
    }
}

/// Parses `low:high:count` or a comma-separated list of values in `[0, 1]`.
pub fn parse_lambda_list(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::InvalidParameter(msg);
    let text = text.trim();
    if text.is_empty() {
        return Err(bad("empty lambda list".into()));
    }
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let [lo, hi, count] = parts[..] else {
            return Err(bad(format!("expected low:high:count, got {text:?}")));
        };
        let lo: f64 = lo.parse().map_err(|_| bad(format!("bad number {lo:?}")))?;
        let hi: f64 = hi.parse().map_err(|_| bad(format!("bad number {hi:?}")))?;
        let count: usize = count.parse().map_err(|_| bad(format!("bad count {count:?}")))?;
        if count == 0 || count > 100_000 || (count > 1 && !(lo < hi && hi.is_finite())) {
            return Err(bad(format!("invalid range {text:?}")));
        }
        if count == 1 {
            vec![lo]
        } else {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count).map(|i| lo + i as f64 * step).collect()
        }
    } else {
        text.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(bad(format!("lambda {v} outside [0, 1]")));
    }
    Ok(values)
}

/// Log of the exchange acceptance ratio between grid points `r` and `r + 1`.
pub fn exchange_log_ratio(
    lambdas: (f64, f64),
    transverse: (usize, usize),
    problem: (usize, usize),
) -> f64 {
    let (l0, l1) = lambdas;
    let dt = transverse.1 as f64 - transverse.0 as f64;
    let dp = problem.1 as f64 - problem.0 as f64;
    let mut log = 0.0;
    if dt != 0.0 {
        log += dt * (l0 / l1).ln();
    }
    if dp != 0.0 {
        log += dp * ((1.0 - l0) / (1.0 - l1)).ln();
    }
    log
}

/// Per-pair exchange statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub attempts: u64,
    pub accepted: u64,
}

impl PairStats {
    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }

    pub fn is_low(&self) -> bool {
        self.attempts > 0 && self.rate() < LOW_ACCEPTANCE
    }
}

/// One SSE configuration per grid point; the tables stay fixed while
/// configurations move between them.
#[derive(Clone, Debug)]
pub struct ReplicaSet {
    tables: Vec<OperatorTable>,
    states: Vec<SseState>,
    walker_at: Vec<usize>,
    pairs: Vec<PairStats>,
    /// Last grid end visited by each walker: −1 low, +1 high, 0 neither.
    last_end: Vec<i8>,
    round_trips: Vec<u64>,
    rounds: u64,
    exchange: bool,
    rng: McRng,
}

impl ReplicaSet {
    /// Fresh random configurations; walker `r` starts at point `r` and draws
    /// from its own stream of `seed`.
    pub fn new(h: &ProblemHamiltonian, lambdas: &[f64], beta: f64, seed: u64) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidParameter("no grid points".into()));
        }
        let tables = lambdas
            .iter()
            .map(|&l| build_operator_table(h, l))
            .collect::<Result<Vec<_>>>()?;
        let states = (0..lambdas.len())
            .map(|r| SseState::random(h.n(), beta, stream(seed, &[r as u64])))
            .collect::<Result<Vec<_>>>()?;
        let r = lambdas.len();
        let mut set = ReplicaSet {
            tables,
            states,
            walker_at: (0..r).collect(),
            pairs: lambdas
                .windows(2)
                .map(|w| PairStats {
                    lambda_low: w[0],
                    lambda_high: w[1],
                    attempts: 0,
                    accepted: 0,
                })
                .collect(),
            last_end: vec![0; r],
            round_trips: vec![0; r],
            rounds: 0,
            exchange: true,
            rng: stream(seed, &[u64::MAX]),
        };
        set.track_ends();
        Ok(set)
    }

    pub fn set_exchange(&mut self, enabled: bool) {
        self.exchange = enabled;
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.tables.iter().map(OperatorTable::lambda).collect()
    }

    pub fn table(&self, r: usize) -> &OperatorTable {
        &self.tables[r]
    }

    pub fn state(&self, r: usize) -> &SseState {
        &self.states[r]
    }

    pub fn state_mut(&mut self, r: usize) -> &mut SseState {
        &mut self.states[r]
    }

    /// Walker currently at each grid point.
    pub fn walkers(&self) -> &[usize] {
        &self.walker_at
    }

    pub fn pair_stats(&self) -> &[PairStats] {
        &self.pairs
    }

    /// Indices of adjacent pairs with acceptance below [`LOW_ACCEPTANCE`].
    pub fn low_acceptance_pairs(&self) -> Vec<usize> {
        (0..self.pairs.len()).filter(|&r| self.pairs[r].is_low()).collect()
    }

    /// Completed low→high→low round trips, summed over walkers.
    pub fn round_trips(&self) -> u64 {
        self.round_trips.iter().sum()
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// One Monte Carlo sweep on every replica, in parallel.
    pub fn sweep_all(&mut self, thermalizing: bool) -> Vec<SweepStats> {
        self.states
            .par_iter_mut()
            .zip(self.tables.par_iter())
            .map(|(s, t)| s.mc_sweep(t, thermalizing))
            .collect()
    }

    /// Metropolis swap of the configurations at points `r` and `r + 1`.
    pub fn attempt_exchange(&mut self, r: usize) -> bool {
        assert!(r + 1 < self.states.len(), "pair index {r} out of range");
        let (a, b) = (&self.states[r], &self.states[r + 1]);
        let log = exchange_log_ratio(
            (self.tables[r].lambda(), self.tables[r + 1].lambda()),
            (a.n_transverse(), b.n_transverse()),
            (a.n_problem(), b.n_problem()),
        );
        let accept = log >= 0.0 || self.rng.random::<f64>() < log.exp();
        self.pairs[r].attempts += 1;
        if accept {
            self.pairs[r].accepted += 1;
            self.states.swap(r, r + 1);
            self.walker_at.swap(r, r + 1);
        }
        accept
    }

    fn track_ends(&mut self) {
        let r = self.walker_at.len();
        if r < 2 {
            return;
        }
        let low = self.walker_at[0];
        if self.last_end[low] == 1 {
            self.round_trips[low] += 1;
        }
        self.last_end[low] = -1;
        self.last_end[self.walker_at[r - 1]] = 1;
    }

    /// `sweeps` sweeps on every replica followed by exchange attempts on
    /// the even pairs (even rounds) or odd pairs (odd rounds).
    pub fn emc_round(&mut self, sweeps: usize, thermalizing: bool) {
        for _ in 0..sweeps {
            self.sweep_all(thermalizing);
        }
        if thermalizing {
            // configurations travel along the grid, so each needs room for
            // the longest string any grid point produces
            let m = self.states.iter().map(SseState::cutoff).max().unwrap_or(0);
            for s in &mut self.states {
                s.grow_cutoff(m);
            }
        }
        if self.exchange && self.states.len() > 1 {
            let parity = (self.rounds % 2) as usize;
            for r in (parity..self.states.len() - 1).step_by(2) {
                self.attempt_exchange(r);
            }
            self.track_ends();
        }
        self.rounds += 1;
    }

    pub fn snapshot(&self) -> ReplicaSnapshot {
        ReplicaSnapshot {
            lambdas: self.lambdas(),
            states: self.states.iter().map(SseState::snapshot).collect(),
            walker_at: self.walker_at.clone(),
            pairs: self.pairs.clone(),
            last_end: self.last_end.clone(),
            round_trips: self.round_trips.clone(),
            rounds: self.rounds,
            exchange: self.exchange,
            rng: self.rng.clone(),
        }
    }

    pub fn restore(h: &ProblemHamiltonian, snap: ReplicaSnapshot) -> Result<Self> {
        let bad = |m: &str| Error::InvalidCheckpoint(m.to_string());
        let r = snap.lambdas.len();
        if r == 0 || snap.states.len() != r {
            return Err(bad("replica count does not match grid"));
        }
        if snap.pairs.len() != r - 1
            || snap.last_end.len() != r
            || snap.round_trips.len() != r
            || snap.walker_at.len() != r
        {
            return Err(bad("inconsistent bookkeeping lengths"));
        }
        let mut seen = vec![false; r];
        for &w in &snap.walker_at {
            if w >= r || std::mem::replace(&mut seen[w], true) {
                return Err(bad("walker map is not a permutation"));
            }
        }
        if snap.last_end.iter().any(|e| !(-1..=1).contains(e)) {
            return Err(bad("bad walker direction"));
        }
        let tables = snap
            .lambdas
            .iter()
            .map(|&l| build_operator_table(h, l))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| bad(&e.to_string()))?;
        let states = snap
            .states
            .into_iter()
            .zip(&tables)
            .map(|(s, t)| SseState::restore(s, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReplicaSet {
            tables,
            states,
            walker_at: snap.walker_at,
            pairs: snap.pairs,
            last_end: snap.last_end,
            round_trips: snap.round_trips,
            rounds: snap.rounds,
            exchange: snap.exchange,
            rng: snap.rng,
        })
    }
}

/// Serializable state of a [`ReplicaSet`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaSnapshot {
    pub lambdas: Vec<f64>,
    pub states: Vec<SseSnapshot>,
    pub walker_at: Vec<usize>,
    pub pairs: Vec<PairStats>,
    pub last_end: Vec<i8>,
    pub round_trips: Vec<u64>,
    pub rounds: u64,
    pub exchange: bool,
    pub rng: McRng,
}
