//! Stochastic series expansion sampler for `H(λ)`.
//!
//! A configuration is a spin state at imaginary-time origin plus a string of
//! `M` slots. Each slot is empty or holds an entry of an [`OperatorTable`];
//! transverse entries appear either diagonally (constant `λ`) or as a spin
//! flip (`λ σ^x`). One Monte Carlo sweep is a diagonal update, a
//! Swendsen–Wang cluster update and a free-spin update.
//!
//! Cluster rules: transverse vertices cut their site's worldline (two
//! independent legs), bond vertices join all four legs, field vertices join
//! their two legs and freeze the cluster. Every unfrozen cluster is flipped
//! with probability 1/2; a transverse vertex whose two sides end up flipped
//! differently switches between its diagonal and flip forms.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{OperatorClass, OperatorKind, OperatorTable};
use crate::rng::McRng;

/// Slots added on top of `4n/3` when the string grows.
pub const CUTOFF_PADDING: usize = 8;

/// Smallest string length a state starts with.
pub const MIN_CUTOFF: usize = 16;

const NONE: u32 = u32::MAX;

/// Content of one string position. The payload is the operator table index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Identity,
    Diagonal(u32),
    /// Off-diagonal form of a transverse entry.
    Flip(u32),
}

impl Slot {
    fn encode(self) -> u32 {
        match self {
            Slot::Identity => NONE,
            Slot::Diagonal(k) => k << 1,
            Slot::Flip(k) => k << 1 | 1,
        }
    }

    fn decode(code: u32) -> Slot {
        if code == NONE {
            Slot::Identity
        } else if code & 1 == 1 {
            Slot::Flip(code >> 1)
        } else {
            Slot::Diagonal(code >> 1)
        }
    }

    #[inline]
    pub fn operator(self) -> Option<usize> {
        match self {
            Slot::Identity => None,
            Slot::Diagonal(k) | Slot::Flip(k) => Some(k as usize),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub n_ops: usize,
    pub cutoff: usize,
    pub clusters: usize,
    pub flipped_clusters: usize,
    pub frozen_clusters: usize,
}

impl SweepStats {
    pub fn fill_fraction(&self) -> f64 {
        if self.cutoff == 0 {
            0.0
        } else {
            self.n_ops as f64 / self.cutoff as f64
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Scratch {
    spins: Vec<i8>,
    first: Vec<u32>,
    last: Vec<u32>,
    // Union-find over vertex units: one per bond or field vertex, a lower
    // and an upper one per transverse vertex.
    parent: Vec<u32>,
    field_unit: Vec<bool>,
    label: Vec<u32>,
    // (slot, lower unit) of each transverse vertex.
    transverse: Vec<(u32, u32)>,
    frozen: Vec<bool>,
    flip: Vec<bool>,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let g = parent[parent[x as usize] as usize];
        parent[x as usize] = g;
        x = g;
    }
    x
}

// Roots are always the smallest unit of their cluster.
fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra < rb {
        parent[rb as usize] = ra;
    } else {
        parent[ra as usize] = rb;
    }
}

/// One SSE configuration with its private random stream.
#[derive(Clone, Debug)]
pub struct SseState {
    spins: Vec<i8>,
    slots: Vec<Slot>,
    n_ops: usize,
    n_transverse: usize,
    beta: f64,
    rng: McRng,
    scratch: Scratch,
}

impl SseState {
    /// Empty string of length `cutoff.max(MIN_CUTOFF)` on top of `spins`.
    pub fn new(spins: Vec<i8>, beta: f64, cutoff: usize, rng: McRng) -> Result<Self> {
        if beta <= 0.0 || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("spins must be +1 or -1".into()));
        }
        Ok(SseState {
            spins,
            slots: vec![Slot::Identity; cutoff.max(MIN_CUTOFF)],
            n_ops: 0,
            n_transverse: 0,
            beta,
            rng,
            scratch: Scratch::default(),
        })
    }

    /// Random initial spins drawn from `rng`, which then becomes the state's
    /// stream.
    pub fn random(n_sites: usize, beta: f64, mut rng: McRng) -> Result<Self> {
        let spins = (0..n_sites)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self::new(spins, beta, MIN_CUTOFF.max(4 * n_sites), rng)
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn n_sites(&self) -> usize {
        self.spins.len()
    }

    /// Number of non-identity operators `n`.
    pub fn n_ops(&self) -> usize {
        self.n_ops
    }

    /// Operators from the driver (`T`).
    pub fn n_transverse(&self) -> usize {
        self.n_transverse
    }

    /// Operators from the problem Hamiltonian (`P`).
    pub fn n_problem(&self) -> usize {
        self.n_ops - self.n_transverse
    }

    pub fn cutoff(&self) -> usize {
        self.slots.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rng_mut(&mut self) -> &mut McRng {
        &mut self.rng
    }

    /// Inserts or removes diagonal operators slot by slot; flip operators
    /// only propagate the spins.
    pub fn diagonal_update(&mut self, table: &OperatorTable) {
        let total = table.total_weight();
        let m = self.slots.len() as f64;
        let beta_total = self.beta * total;
        let mut spins = std::mem::take(&mut self.scratch.spins);
        spins.clear();
        spins.extend_from_slice(&self.spins);

        for slot in self.slots.iter_mut() {
            match *slot {
                Slot::Identity => {
                    if total <= 0.0 {
                        continue;
                    }
                    let accept = beta_total / (m - self.n_ops as f64);
                    if accept >= 1.0 || self.rng.random::<f64>() < accept {
                        let k = table.sample(&mut self.rng).expect("positive total weight");
                        let kind = table.entry(k);
                        if kind.allows(&spins) {
                            *slot = Slot::Diagonal(k as u32);
                            self.n_ops += 1;
                            if kind.class() == OperatorClass::Transverse {
                                self.n_transverse += 1;
                            }
                        }
                    }
                }
                Slot::Diagonal(k) => {
                    let accept = (m - self.n_ops as f64 + 1.0) / beta_total;
                    if accept >= 1.0 || self.rng.random::<f64>() < accept {
                        *slot = Slot::Identity;
                        self.n_ops -= 1;
                        if table.entry(k as usize).class() == OperatorClass::Transverse {
                            self.n_transverse -= 1;
                        }
                    }
                }
                Slot::Flip(k) => {
                    if let OperatorKind::Transverse { site } = table.entry(k as usize) {
                        spins[site as usize] = -spins[site as usize];
                    }
                }
            }
        }
        debug_assert_eq!(spins, self.spins, "string is not periodic");
        self.scratch.spins = spins;
    }

    /// Swendsen–Wang cluster update. Returns (clusters, flipped, frozen).
    ///
    /// Clusters are labelled in order of their earliest vertex, so the
    /// random flips are drawn in string order.
    pub fn cluster_update(&mut self, table: &OperatorTable) -> (usize, usize, usize) {
        let n_sites = self.spins.len();
        let s = &mut self.scratch;
        s.first.clear();
        s.first.resize(n_sites, NONE);
        s.last.clear();
        s.last.resize(n_sites, NONE);
        s.parent.clear();
        s.field_unit.clear();
        s.transverse.clear();

        let mut attach = |parent: &mut Vec<u32>, site: usize, lower: u32, upper: u32| {
            if s.last[site] == NONE {
                s.first[site] = lower;
            } else {
                union(parent, s.last[site], lower);
            }
            s.last[site] = upper;
        };
        for (p, slot) in self.slots.iter().enumerate() {
            let Some(k) = slot.operator() else { continue };
            let u = s.parent.len() as u32;
            s.parent.push(u);
            match table.entry(k) {
                OperatorKind::Bond { i, j } => {
                    s.field_unit.push(false);
                    attach(&mut s.parent, i as usize, u, u);
                    attach(&mut s.parent, j as usize, u, u);
                }
                OperatorKind::Field { site, .. } => {
                    s.field_unit.push(true);
                    attach(&mut s.parent, site as usize, u, u);
                }
                OperatorKind::Transverse { site } => {
                    s.parent.push(u + 1);
                    s.field_unit.extend([false, false]);
                    s.transverse.push((p as u32, u));
                    attach(&mut s.parent, site as usize, u, u + 1);
                }
            }
        }
        for site in 0..n_sites {
            if s.first[site] != NONE {
                union(&mut s.parent, s.last[site], s.first[site]);
            }
        }

        s.label.clear();
        s.frozen.clear();
        for u in 0..s.parent.len() as u32 {
            let root = find(&mut s.parent, u);
            let c = if root == u {
                s.frozen.push(false);
                s.frozen.len() as u32 - 1
            } else {
                s.label[root as usize]
            };
            s.label.push(c);
            if s.field_unit[u as usize] {
                s.frozen[c as usize] = true;
            }
        }

        let n_clusters = s.frozen.len();
        s.flip.clear();
        let mut flipped = 0;
        let mut frozen = 0;
        for c in 0..n_clusters {
            let f = if s.frozen[c] {
                frozen += 1;
                false
            } else {
                self.rng.random::<bool>()
            };
            flipped += f as usize;
            s.flip.push(f);
        }

        for &(p, u) in &s.transverse {
            let below = s.flip[s.label[u as usize] as usize];
            let above = s.flip[s.label[u as usize + 1] as usize];
            if below != above {
                let p = p as usize;
                self.slots[p] = match self.slots[p] {
                    Slot::Diagonal(k) => Slot::Flip(k),
                    Slot::Flip(k) => Slot::Diagonal(k),
                    Slot::Identity => unreachable!("vertex slot is empty"),
                };
            }
        }
        for site in 0..n_sites {
            let f = s.first[site];
            if f != NONE && s.flip[s.label[f as usize] as usize] {
                self.spins[site] = -self.spins[site];
            }
        }
        (n_clusters, flipped, frozen)
    }

    /// Flips, with probability 1/2 each, the spins that no operator touches.
    pub fn free_spin_flip(&mut self, table: &OperatorTable) {
        let touched = &mut self.scratch.frozen;
        touched.clear();
        touched.resize(self.spins.len(), false);
        for slot in &self.slots {
            if let Some(k) = slot.operator() {
                match table.entry(k) {
                    OperatorKind::Bond { i, j } => {
                        touched[i as usize] = true;
                        touched[j as usize] = true;
                    }
                    OperatorKind::Field { site, .. } | OperatorKind::Transverse { site } => {
                        touched[site as usize] = true;
                    }
                }
            }
        }
        for (spin, &t) in self.spins.iter_mut().zip(touched.iter()) {
            if !t && self.rng.random::<bool>() {
                *spin = -*spin;
            }
        }
    }

    /// Grows the string to `ceil(4n/3) + CUTOFF_PADDING` when more than 3/4
    /// full. Never shrinks.
    pub fn adjust_cutoff(&mut self) {
        if 4 * self.n_ops > 3 * self.slots.len() {
            self.grow_cutoff((4 * self.n_ops).div_ceil(3) + CUTOFF_PADDING);
        }
    }

    /// Extends the string to `new_m` slots by inserting empty slots at
    /// random positions; no-op if it is already that long.
    pub fn grow_cutoff(&mut self, new_m: usize) {
        let m = self.slots.len();
        if new_m <= m {
            return;
        }
        let mut is_new = vec![false; new_m];
        for idx in sample_indices(&mut self.rng, new_m, new_m - m).iter() {
            is_new[idx] = true;
        }
        let mut old = self.slots.iter().copied();
        self.slots = is_new
            .into_iter()
            .map(|fresh| {
                if fresh {
                    Slot::Identity
                } else {
                    old.next().expect("old slots fill the rest")
                }
            })
            .collect();
    }

    /// One Monte Carlo sweep. The cutoff is only adjusted while thermalizing.
    pub fn mc_sweep(&mut self, table: &OperatorTable, thermalizing: bool) -> SweepStats {
        self.diagonal_update(table);
        let (clusters, flipped_clusters, frozen_clusters) = self.cluster_update(table);
        self.free_spin_flip(table);
        if thermalizing {
            self.adjust_cutoff();
        }
        SweepStats {
            n_ops: self.n_ops,
            cutoff: self.slots.len(),
            clusters,
            flipped_clusters,
            frozen_clusters,
        }
    }

    /// Checks the configuration invariants: operator count, periodicity,
    /// and nonzero weight of every diagonal operator.
    pub fn check_consistency(&self, table: &OperatorTable) -> std::result::Result<(), String> {
        let mut spins = self.spins.clone();
        let mut count = 0;
        let mut transverse = 0;
        for (p, slot) in self.slots.iter().enumerate() {
            let Some(k) = slot.operator() else { continue };
            if k >= table.len() {
                return Err(format!("slot {p} references missing operator {k}"));
            }
            count += 1;
            let kind = table.entry(k);
            if kind.class() == OperatorClass::Transverse {
                transverse += 1;
            }
            match (slot, kind) {
                (Slot::Flip(_), OperatorKind::Transverse { site }) => {
                    spins[site as usize] = -spins[site as usize];
                }
                (Slot::Flip(_), _) => return Err(format!("slot {p} flips a diagonal operator")),
                (Slot::Diagonal(_), kind) => {
                    if !kind.allows(&spins) {
                        return Err(format!("operator at slot {p} has zero weight"));
                    }
                }
                (Slot::Identity, _) => unreachable!(),
            }
        }
        if count != self.n_ops || transverse != self.n_transverse {
            return Err(format!(
                "operator counts ({count}, {transverse}) disagree with cached ({}, {})",
                self.n_ops, self.n_transverse
            ));
        }
        if spins != self.spins {
            return Err("propagated state does not return to the origin".into());
        }
        Ok(())
    }

    pub fn snapshot(&self) -> SseSnapshot {
        SseSnapshot {
            version: SNAPSHOT_VERSION,
            beta: self.beta,
            spins: self.spins.clone(),
            slots: self.slots.iter().map(|s| s.encode()).collect(),
            rng: self.rng.clone(),
        }
    }

    /// Rebuilds a state from a snapshot, validating it against `table`.
    pub fn restore(snap: SseSnapshot, table: &OperatorTable) -> Result<Self> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::InvalidCheckpoint(format!(
                "unsupported snapshot version {}",
                snap.version
            )));
        }
        if snap.spins.len() != table.n_sites() {
            return Err(Error::InvalidCheckpoint(format!(
                "snapshot has {} spins, table has {} sites",
                snap.spins.len(),
                table.n_sites()
            )));
        }
        let slots: Vec<Slot> = snap.slots.iter().map(|&c| Slot::decode(c)).collect();
        let mut state = SseState::new(snap.spins, snap.beta, 0, snap.rng)
            .map_err(|e| Error::InvalidCheckpoint(e.to_string()))?;
        if slots.len() < MIN_CUTOFF {
            return Err(Error::InvalidCheckpoint("string shorter than the minimum cutoff".into()));
        }
        for (p, slot) in slots.iter().enumerate() {
            if let Some(k) = slot.operator() {
                if k >= table.len() {
                    return Err(Error::InvalidCheckpoint(format!(
                        "slot {p} references missing operator {k}"
                    )));
                }
            }
        }
        state.n_ops = slots.iter().filter(|s| **s != Slot::Identity).count();
        state.n_transverse = slots
            .iter()
            .filter_map(|s| s.operator())
            .filter(|&k| table.entry(k).class() == OperatorClass::Transverse)
            .count();
        state.slots = slots;
        state
            .check_consistency(table)
            .map_err(Error::InvalidCheckpoint)?;
        Ok(state)
    }
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Serializable SSE configuration. Slots are encoded as `u32::MAX` for the
/// identity and `2k` / `2k + 1` for the diagonal / flip form of entry `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SseSnapshot {
    pub version: u32,
    pub beta: f64,
    pub spins: Vec<i8>,
    pub slots: Vec<u32>,
    pub rng: McRng,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::hamiltonian::{build_operator_table, build_problem};
    use crate::rng::stream;

    fn table_for(g: &Graph, lambda: f64) -> OperatorTable {
        build_operator_table(&build_problem(g, 2.0).unwrap(), lambda).unwrap()
    }

    #[test]
    fn zero_weight_table_never_inserts() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let table = table_for(&g, 0.0);
        // Parallel spins: the bond has zero weight and the fields vanish.
        let mut s = SseState::new(vec![1, 1], 2.0, 32, stream(1, &[])).unwrap();
        for _ in 0..100 {
            s.diagonal_update(&table);
            assert_eq!(s.n_ops(), 0);
        }
    }

    #[test]
    fn sweeps_keep_invariants() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        for &lambda in &[0.05, 0.4, 0.95] {
            let table = table_for(&g, lambda);
            let mut s = SseState::random(5, 6.0, stream(3, &[])).unwrap();
            for i in 0..400 {
                let stats = s.mc_sweep(&table, i < 200);
                s.check_consistency(&table).unwrap();
                assert!(stats.n_ops <= stats.cutoff);
            }
        }
    }

    #[test]
    fn cutoff_growth() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let table = table_for(&g, 0.5);
        let mut s = SseState::new(vec![1, -1], 10.0, 16, stream(1, &[])).unwrap();
        s.adjust_cutoff();
        assert_eq!(s.cutoff(), 16);
        for (p, slot) in s.slots.iter_mut().enumerate() {
            *slot = Slot::Diagonal(table.transverse_index(p % 2) as u32);
        }
        s.n_ops = 16;
        s.n_transverse = 16;
        s.adjust_cutoff();
        assert!(s.cutoff() > 16);
        assert_eq!(s.n_ops(), 16);
        s.check_consistency(&table).unwrap();
    }

    #[test]
    fn frozen_cluster_never_flips() {
        // Isolated vertex: a single field entry (h = 1/2).
        let g = Graph::empty(1);
        let table = table_for(&g, 0.5);
        let field = table
            .entries()
            .iter()
            .position(|e| matches!(e, OperatorKind::Field { .. }))
            .unwrap() as u32;
        let mut s = SseState::new(vec![1], 1.0, 16, stream(2, &[])).unwrap();
        s.slots[3] = Slot::Diagonal(field);
        s.n_ops = 1;
        for _ in 0..200 {
            let (clusters, flipped, frozen) = s.cluster_update(&table);
            assert_eq!((clusters, flipped, frozen), (1, 0, 1));
            assert_eq!(s.spins(), &[1]);
        }
    }

    #[test]
    fn free_spins_resampled_when_string_empty() {
        let g = Graph::empty(3);
        let table = table_for(&g, 0.5);
        let mut s = SseState::new(vec![1, 1, 1], 1.0, 16, stream(4, &[])).unwrap();
        let mut ups = [0usize; 3];
        let trials = 4000;
        for _ in 0..trials {
            s.free_spin_flip(&table);
            for (u, &sp) in ups.iter_mut().zip(s.spins()) {
                *u += (sp == 1) as usize;
            }
        }
        for u in ups {
            let frac = u as f64 / trials as f64;
            assert!((frac - 0.5).abs() < 0.05, "up fraction {frac}");
        }
    }

    #[test]
    fn bond_covered_site_untouched_by_free_flip() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        let table = table_for(&g, 0.5);
        let mut s = SseState::new(vec![1, -1, 1], 1.0, 16, stream(5, &[])).unwrap();
        s.slots[0] = Slot::Diagonal(0);
        s.n_ops = 1;
        for _ in 0..100 {
            s.free_spin_flip(&table);
            assert_eq!(&s.spins()[..2], &[1, -1]);
        }
    }

    #[test]
    fn sweeps_are_deterministic() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let table = table_for(&g, 0.3);
        let run = || {
            let mut s = SseState::random(4, 8.0, stream(77, &[])).unwrap();
            (0..300).map(|i| s.mc_sweep(&table, i < 100)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn snapshot_roundtrip_continues_identically() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let table = table_for(&g, 0.4);
        let mut a = SseState::random(4, 8.0, stream(9, &[])).unwrap();
        for _ in 0..100 {
            a.mc_sweep(&table, true);
        }
        let json = serde_json::to_string(&a.snapshot()).unwrap();
        let mut b = SseState::restore(serde_json::from_str(&json).unwrap(), &table).unwrap();
        for _ in 0..50 {
            assert_eq!(a.mc_sweep(&table, false), b.mc_sweep(&table, false));
        }
        assert_eq!(a.spins(), b.spins());
        assert_eq!(a.slots(), b.slots());
    }

    #[test]
    fn corrupt_snapshot_rejected() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let table = table_for(&g, 0.4);
        let s = SseState::random(2, 4.0, stream(9, &[])).unwrap();
        let mut snap = s.snapshot();
        snap.slots[0] = 1000;
        assert!(SseState::restore(snap.clone(), &table).is_err());
        snap.slots[0] = (table.transverse_index(0) as u32) << 1 | 1;
        assert!(SseState::restore(snap.clone(), &table).is_err());
        snap.slots[0] = u32::MAX;
        snap.version = 99;
        assert!(SseState::restore(snap, &table).is_err());
    }
}
