//! Exact maximum-independent-set solvers.
//!
//! [`leaf_removal`] and [`dplr`] follow the leaf-removal / branch-and-recurse
//! scheme: strip degree-0 and degree-1 vertices, then branch on one vertex of
//! the remaining core (include it and drop its neighbors, or exclude it) and
//! keep the better branch. The number of DPLR invocations is the hardness
//! proxy used by the scaling experiments.
//!
//! [`brute_force_mis`] is an independent exhaustive oracle for small graphs,
//! and [`enumerate_maximum_sets`] lists every maximum independent set using
//! DPLR as an exact bound.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::VertexSet;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{stream, McRng};

/// Largest graph accepted by [`brute_force_mis`].
pub const BRUTE_FORCE_MAX_N: usize = 24;

/// Default cap on DPLR invocations.
pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000_000;

/// Working state of LR / DPLR: the surviving subgraph, per-vertex marks
/// (`+1` in, `-1` out, `0` undecided) and the running set size.
#[derive(Clone, Debug)]
pub struct SolverState {
    alive: VertexSet,
    degree: Vec<u32>,
    marks: Vec<i8>,
    k: usize,
}

impl SolverState {
    pub fn new(g: &Graph) -> Self {
        SolverState {
            alive: VertexSet::full(g.n()),
            degree: (0..g.n()).map(|v| g.degree(v) as u32).collect(),
            marks: vec![0; g.n()],
            k: 0,
        }
    }

    /// State restricted to the induced subgraph on `alive`. Vertices outside
    /// `alive` are marked out.
    pub fn restricted(adjacency: &[VertexSet], alive: VertexSet) -> Self {
        let n = adjacency.len();
        let mut degree = vec![0u32; n];
        let mut marks = vec![-1i8; n];
        for v in alive.iter() {
            degree[v] = adjacency[v].intersection_len(&alive) as u32;
            marks[v] = 0;
        }
        SolverState {
            alive,
            degree,
            marks,
            k: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn marks(&self) -> &[i8] {
        &self.marks
    }

    pub fn alive(&self) -> &VertexSet {
        &self.alive
    }

    pub fn core_size(&self) -> usize {
        self.alive.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degree[v] as usize
    }

    fn remove(&mut self, g: &Graph, v: usize, mark: i8, low_degree: &mut Vec<usize>) {
        debug_assert!(self.alive.contains(v));
        self.alive.remove(v);
        self.marks[v] = mark;
        for &u in g.neighbors(v) {
            if self.alive.contains(u) {
                self.degree[u] -= 1;
                if self.degree[u] < 2 {
                    low_degree.push(u);
                }
            }
        }
    }

    fn alive_neighbor(&self, g: &Graph, v: usize) -> Option<usize> {
        g.neighbors(v).iter().copied().find(|&u| self.alive.contains(u))
    }
}

/// Applies the leaf rules until every undecided vertex has degree at least 2.
pub fn leaf_removal(g: &Graph, mut state: SolverState) -> SolverState {
    leaf_removal_in_place(g, &mut state);
    state
}

fn leaf_removal_in_place(g: &Graph, state: &mut SolverState) {
    let mut work: Vec<usize> = state
        .alive
        .iter()
        .filter(|&v| state.degree[v] < 2)
        .collect();
    work.reverse();
    while let Some(v) = work.pop() {
        if !state.alive.contains(v) {
            continue;
        }
        match state.degree[v] {
            0 => {
                state.k += 1;
                state.remove(g, v, 1, &mut work);
            }
            1 => {
                state.k += 1;
                let w = state
                    .alive_neighbor(g, v)
                    .expect("degree-1 vertex has an alive neighbor");
                state.remove(g, v, 1, &mut work);
                state.remove(g, w, -1, &mut work);
            }
            _ => {}
        }
    }
}

/// How DPLR picks the vertex to branch on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum BranchRule {
    /// Highest remaining degree, ties to the lowest index.
    #[default]
    MaxDegree,
    /// Uniformly random remaining vertex.
    Random { seed: u64 },
}

impl fmt::Display for BranchRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchRule::MaxDegree => f.write_str("max-degree"),
            BranchRule::Random { .. } => f.write_str("random"),
        }
    }
}

impl FromStr for BranchRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-degree" => Ok(BranchRule::MaxDegree),
            "random" => Ok(BranchRule::Random { seed: 0 }),
            other => Err(Error::InvalidParameter(format!(
                "unknown branching rule '{other}' (expected max-degree or random)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub branch: BranchRule,
    pub step_budget: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            branch: BranchRule::MaxDegree,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResult {
    pub mis_size: usize,
    #[serde(with = "bits")]
    pub config: Vec<bool>,
    pub steps: u64,
}

struct Dplr<'g> {
    g: &'g Graph,
    rule: BranchRule,
    rng: Option<McRng>,
    steps: u64,
    budget: u64,
}

impl Dplr<'_> {
    fn choose(&mut self, state: &SolverState) -> usize {
        match self.rule {
            BranchRule::MaxDegree => {
                let mut best = None;
                let mut best_deg = 0;
                for v in state.alive.iter() {
                    let d = state.degree[v];
                    if best.is_none() || d > best_deg {
                        best = Some(v);
                        best_deg = d;
                    }
                }
                best.expect("core is non-empty")
            }
            BranchRule::Random { .. } => {
                let rng = self.rng.as_mut().expect("random rule has a stream");
                let pick = rng.random_range(0..state.alive.len());
                state.alive.iter().nth(pick).expect("pick in range")
            }
        }
    }

    fn run(&mut self, mut state: SolverState) -> Result<SolverState> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(Error::RecursionBudgetExceeded { steps: self.steps - 1 });
        }
        leaf_removal_in_place(self.g, &mut state);
        if state.alive.is_empty() {
            return Ok(state);
        }
        let v = self.choose(&state);
        let mut scratch = Vec::new();

        let mut inc = state.clone();
        let nbrs: Vec<usize> = self
            .g
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&u| inc.alive.contains(u))
            .collect();
        inc.remove(self.g, v, 1, &mut scratch);
        for u in nbrs {
            inc.remove(self.g, u, -1, &mut scratch);
        }
        let mut exc = state;
        exc.remove(self.g, v, -1, &mut scratch);

        let mut inc = self.run(inc)?;
        inc.k += 1;
        let exc = self.run(exc)?;
        Ok(if inc.k >= exc.k { inc } else { exc })
    }
}

/// Exact MIS by leaf removal plus binary branching.
pub fn dplr(g: &Graph, opts: &SolveOptions) -> Result<SolveResult> {
    let mut solver = Dplr {
        g,
        rule: opts.branch,
        rng: match opts.branch {
            BranchRule::Random { seed } => Some(stream(seed, &[0x4450_4c52])),
            BranchRule::MaxDegree => None,
        },
        steps: 0,
        budget: opts.step_budget,
    };
    let done = solver.run(SolverState::new(g))?;
    let config: Vec<bool> = done.marks.iter().map(|&m| m == 1).collect();
    debug_assert_eq!(config.iter().filter(|&&b| b).count(), done.k);
    Ok(SolveResult {
        mis_size: done.k,
        config,
        steps: solver.steps,
    })
}

/// All maximum independent sets of a small graph, found by exhaustive
/// search over independent sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BruteForce {
    pub mis_size: usize,
    pub solutions: Vec<Vec<bool>>,
}

pub fn brute_force_mis(g: &Graph) -> Result<BruteForce> {
    let n = g.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::SizeTooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let closed: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(1u32 << v, |m, &u| m | 1 << u))
        .collect();

    fn walk(closed: &[u32], chosen: u32, allowed: u32, best: &mut u32, found: &mut Vec<u32>) {
        if chosen.count_ones() + allowed.count_ones() < *best {
            return;
        }
        if allowed == 0 {
            let size = chosen.count_ones();
            if size > *best {
                *best = size;
                found.clear();
            }
            found.push(chosen);
            return;
        }
        let v = allowed.trailing_zeros() as usize;
        walk(closed, chosen | 1 << v, allowed & !closed[v], best, found);
        walk(closed, chosen, allowed & !(1 << v), best, found);
    }

    let mut best = 0;
    let mut found = Vec::new();
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    walk(&closed, 0, all, &mut best, &mut found);
    found.sort_unstable();
    Ok(BruteForce {
        mis_size: best as usize,
        solutions: found
            .into_iter()
            .map(|m| (0..n).map(|v| m >> v & 1 == 1).collect())
            .collect(),
    })
}

/// Exact independence number of induced subgraphs, memoized on the vertex
/// set.
pub struct IndependenceOracle<'g> {
    g: &'g Graph,
    adjacency: Vec<VertexSet>,
    memo: HashMap<VertexSet, usize>,
    budget: u64,
    steps: u64,
}

impl<'g> IndependenceOracle<'g> {
    pub fn new(g: &'g Graph, step_budget: u64) -> Self {
        IndependenceOracle {
            g,
            adjacency: g.adjacency_sets(),
            memo: HashMap::new(),
            budget: step_budget,
            steps: 0,
        }
    }

    pub fn adjacency(&self) -> &[VertexSet] {
        &self.adjacency
    }

    pub fn alpha(&mut self, alive: &VertexSet) -> Result<usize> {
        if let Some(&a) = self.memo.get(alive) {
            return Ok(a);
        }
        let mut solver = Dplr {
            g: self.g,
            rule: BranchRule::MaxDegree,
            rng: None,
            steps: 0,
            budget: self.budget.saturating_sub(self.steps),
        };
        let state = SolverState::restricted(&self.adjacency, alive.clone());
        let result = solver.run(state);
        self.steps += solver.steps;
        let a = result?.k;
        self.memo.insert(alive.clone(), a);
        Ok(a)
    }
}

/// Every maximum independent set of `g`, in a deterministic order.
///
/// Branches only into subproblems that still contain a maximum set, so the
/// work is proportional to the number of solutions times the depth. Fails
/// with [`Error::BudgetExceeded`] once more than `budget` solutions exist.
pub fn enumerate_maximum_sets(g: &Graph, budget: usize) -> Result<(usize, Vec<VertexSet>)> {
    let mut oracle = IndependenceOracle::new(g, DEFAULT_STEP_BUDGET);
    let alive = VertexSet::full(g.n());
    let target = oracle.alpha(&alive)?;
    let mut out = Vec::new();
    enumerate_rec(
        &mut oracle,
        alive,
        VertexSet::empty(g.n()),
        target,
        budget,
        &mut out,
    )?;
    Ok((target, out))
}

fn enumerate_rec(
    oracle: &mut IndependenceOracle<'_>,
    mut alive: VertexSet,
    mut chosen: VertexSet,
    mut target: usize,
    budget: usize,
    out: &mut Vec<VertexSet>,
) -> Result<()> {
    // Isolated vertices belong to every maximum set.
    loop {
        let isolated: Vec<usize> = alive
            .iter()
            .filter(|&v| oracle.adjacency[v].intersection_len(&alive) == 0)
            .collect();
        if isolated.is_empty() {
            break;
        }
        for v in isolated {
            alive.remove(v);
            chosen.insert(v);
            target -= 1;
        }
    }
    if alive.is_empty() {
        debug_assert_eq!(target, 0);
        if out.len() >= budget {
            return Err(Error::BudgetExceeded { budget });
        }
        out.push(chosen);
        return Ok(());
    }

    let degree = |v: usize, alive: &VertexSet| oracle.adjacency[v].intersection_len(alive);
    let leaf = alive.iter().find(|&v| degree(v, &alive) == 1);
    let (pivot, pivot_is_leaf_anchor) = match leaf {
        // Every maximum set holds exactly one of a leaf and its neighbor.
        Some(v) => (
            oracle.adjacency[v]
                .first_common(&alive)
                .expect("leaf has a neighbor"),
            Some(v),
        ),
        None => {
            let mut best = None;
            let mut best_deg = 0;
            for v in alive.iter() {
                let d = degree(v, &alive);
                if best.is_none() || d > best_deg {
                    best = Some(v);
                    best_deg = d;
                }
            }
            (best.expect("non-empty"), None)
        }
    };

    let mut with_pivot = alive.clone();
    with_pivot.remove(pivot);
    for u in oracle.adjacency[pivot].iter() {
        with_pivot.remove(u);
    }
    if oracle.alpha(&with_pivot)? + 1 == target {
        let mut c = chosen.clone();
        c.insert(pivot);
        enumerate_rec(oracle, with_pivot, c, target - 1, budget, out)?;
    }

    let mut without_pivot = alive;
    without_pivot.remove(pivot);
    let feasible = match pivot_is_leaf_anchor {
        // Dropping the neighbor isolates the leaf, which then joins the set.
        Some(_) => true,
        None => oracle.alpha(&without_pivot)? == target,
    };
    if feasible {
        enumerate_rec(oracle, without_pivot, chosen, target, budget, out)?;
    }
    Ok(())
}

pub(crate) mod bits {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<u8> = v.iter().map(|&b| b as u8).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let raw = Vec::<u8>::deserialize(d)?;
        raw.into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(serde::de::Error::custom(format!("bit must be 0 or 1, got {other}"))),
            })
            .collect()
    }
}
