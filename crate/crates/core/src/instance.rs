//! Unique-solution MIS instances.
//!
//! An Erdős–Rényi graph is made to have a single maximum independent set by
//! repeatedly picking one maximum solution, connecting its non-backbone
//! members pairwise (and a leftover one to a backbone member), and
//! recomputing the solution set until only one solution is left.

use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generate_er_graph, Graph};
use crate::rng::{derive_seed, stream};
use crate::solver::enumerate_maximum_sets;

/// Default cap on the number of maximum sets enumerated per graph.
pub const DEFAULT_SOLUTION_BUDGET: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexLabel {
    /// In every maximum independent set.
    BackboneIn,
    /// In no maximum independent set.
    BackboneOut,
    /// In some but not all.
    NonBackbone,
}

#[derive(Clone, Debug)]
pub struct MisEnumeration {
    pub mis_size: usize,
    pub solutions: Vec<Vec<bool>>,
    pub labels: Vec<VertexLabel>,
}

impl MisEnumeration {
    pub fn is_unique(&self) -> bool {
        self.solutions.len() == 1
    }
}

/// All maximum independent sets of `g` plus the backbone labels derived
/// from them.
pub fn enumerate_all_mis(g: &Graph, budget: usize) -> Result<MisEnumeration> {
    let (mis_size, sets) = enumerate_maximum_sets(g, budget)?;
    let n = g.n();
    let mut hits = vec![0usize; n];
    let solutions: Vec<Vec<bool>> = sets.iter().map(|s| s.to_bools(n)).collect();
    for sol in &solutions {
        for (v, &inside) in sol.iter().enumerate() {
            hits[v] += inside as usize;
        }
    }
    let labels = hits
        .into_iter()
        .map(|h| {
            if h == solutions.len() {
                VertexLabel::BackboneIn
            } else if h == 0 {
                VertexLabel::BackboneOut
            } else {
                VertexLabel::NonBackbone
            }
        })
        .collect();
    Ok(MisEnumeration {
        mis_size,
        solutions,
        labels,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// An edge addition removed every solution of the original size.
    SolutionsVanished,
    /// One non-backbone vertex was left over and the chosen solution had no
    /// backbone vertex to connect it to.
    NoBackboneForLoneVertex,
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscardReason::SolutionsVanished => f.write_str("maximum solutions vanished"),
            DiscardReason::NoBackboneForLoneVertex => {
                f.write_str("lone non-backbone vertex without a backbone partner")
            }
        }
    }
}

/// A graph with a verified unique maximum independent set.
#[derive(Clone, Debug, PartialEq)]
pub struct MisInstance {
    pub graph: Graph,
    pub answer: Vec<bool>,
    pub mis_size: usize,
    pub seed: u64,
    pub added_edges: usize,
    pub verified_unique: bool,
}

impl MisInstance {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Answer as a basis-state index (bit `i` set when vertex `i` is in the
    /// set).
    pub fn answer_index(&self) -> usize {
        self.answer
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | (b as usize) << i)
    }

    /// Answer as spins, `+1` for vertices in the set.
    pub fn answer_spins(&self) -> Vec<i8> {
        self.answer.iter().map(|&b| if b { 1 } else { -1 }).collect()
    }
}

/// Adds edges until the maximum independent set is unique.
///
/// The edge set only grows and the independence number is kept; the result
/// is re-verified by a final enumeration.
pub fn uniquify<R: Rng + ?Sized>(
    graph: &Graph,
    rng: &mut R,
    budget: usize,
) -> Result<MisInstance> {
    let mut g = graph.clone();
    let mut added = 0usize;
    let mut current = enumerate_all_mis(&g, budget)?;
    let original_size = current.mis_size;

    while !current.is_unique() {
        let chosen = current
            .solutions
            .choose(rng)
            .expect("at least one maximum set")
            .clone();
        let mut loose: Vec<usize> = (0..g.n())
            .filter(|&v| chosen[v] && current.labels[v] == VertexLabel::NonBackbone)
            .collect();
        loose.shuffle(rng);
        while loose.len() >= 2 {
            let a = loose.pop().expect("len >= 2");
            let b = loose.pop().expect("len >= 2");
            g.add_edge(a, b)?;
            added += 1;
        }
        if let Some(lone) = loose.pop() {
            let anchors: Vec<usize> = (0..g.n())
                .filter(|&v| chosen[v] && current.labels[v] == VertexLabel::BackboneIn)
                .collect();
            let &anchor = anchors
                .choose(rng)
                .ok_or(Error::Discarded(DiscardReason::NoBackboneForLoneVertex))?;
            g.add_edge(lone, anchor)?;
            added += 1;
        }
        current = enumerate_all_mis(&g, budget)?;
        if current.mis_size != original_size {
            return Err(Error::Discarded(DiscardReason::SolutionsVanished));
        }
    }

    let answer = current.solutions.pop().expect("unique solution");
    Ok(MisInstance {
        graph: g,
        mis_size: current.mis_size,
        answer,
        seed: 0,
        added_edges: added,
        verified_unique: true,
    })
}

/// Outcome counters of [`generate_unique_instance`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub attempts: usize,
    pub solutions_vanished: usize,
    pub no_backbone_partner: usize,
    pub budget_exceeded: usize,
}

impl GenerationStats {
    pub fn discarded(&self) -> usize {
        self.solutions_vanished + self.no_backbone_partner + self.budget_exceeded
    }

    pub fn merge(&mut self, other: &GenerationStats) {
        self.attempts += other.attempts;
        self.solutions_vanished += other.solutions_vanished;
        self.no_backbone_partner += other.no_backbone_partner;
        self.budget_exceeded += other.budget_exceeded;
    }
}

/// Draws ER graphs from seeds `derive(master, [n, sample, attempt])` until one
/// survives uniquification. The stored seed identifies the successful
/// attempt.
pub fn generate_unique_instance(
    n: usize,
    degree: f64,
    master: u64,
    sample: u64,
    budget: usize,
    max_attempts: usize,
    stats: &mut GenerationStats,
) -> Result<MisInstance> {
    for attempt in 0..max_attempts as u64 {
        let seed = derive_seed(master, &[n as u64, sample, attempt]);
        stats.attempts += 1;
        match instance_from_seed(n, degree, seed, budget) {
            Ok(inst) => return Ok(inst),
            Err(Error::Discarded(DiscardReason::SolutionsVanished)) => stats.solutions_vanished += 1,
            Err(Error::Discarded(DiscardReason::NoBackboneForLoneVertex)) => {
                stats.no_backbone_partner += 1
            }
            Err(Error::BudgetExceeded { .. }) => stats.budget_exceeded += 1,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidParameter(format!(
        "no unique instance for n={n}, degree={degree} after {max_attempts} attempts"
    )))
}

/// Deterministic single attempt: ER graph and uniquification both driven by
/// `seed`.
pub fn instance_from_seed(n: usize, degree: f64, seed: u64, budget: usize) -> Result<MisInstance> {
    let mut rng = stream(seed, &[]);
    let g = generate_er_graph(n, degree, &mut rng)?;
    let mut inst = uniquify(&g, &mut rng, budget)?;
    inst.seed = seed;
    Ok(inst)
}

/// On-disk instance / graph document. Vertices are 0-indexed; only `n` and
/// `edges` are required, so bare graphs use the same schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mis_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_edges: Option<usize>,
}

/// Largest vertex count accepted from files.
pub const MAX_FILE_VERTICES: usize = 1 << 16;

impl InstanceFile {
    pub fn from_instance(inst: &MisInstance) -> Self {
        InstanceFile {
            n: inst.n(),
            edges: inst.graph.edges().iter().map(|&(i, j)| [i, j]).collect(),
            answer: Some(inst.answer.iter().map(|&b| b as u8).collect()),
            mis_size: Some(inst.mis_size),
            seed: Some(inst.seed),
            added_edges: Some(inst.added_edges),
        }
    }

    pub fn from_graph(g: &Graph) -> Self {
        InstanceFile {
            n: g.n(),
            edges: g.edges().iter().map(|&(i, j)| [i, j]).collect(),
            answer: None,
            mis_size: None,
            seed: None,
            added_edges: None,
        }
    }

    pub fn graph(&self) -> Result<Graph> {
        if self.n > MAX_FILE_VERTICES {
            return Err(Error::SizeTooLarge {
                n: self.n,
                max: MAX_FILE_VERTICES,
            });
        }
        Graph::from_edges(self.n, self.edges.iter().map(|e| (e[0], e[1])))
    }

    /// Full instance. Checks that the answer is an independent set whose size
    /// matches `mis_size`; uniqueness is not re-verified here.
    pub fn instance(&self) -> Result<MisInstance> {
        let graph = self.graph()?;
        let raw = self
            .answer
            .as_ref()
            .ok_or_else(|| Error::InvalidInstance("missing 'answer'".into()))?;
        if raw.len() != self.n {
            return Err(Error::InvalidInstance(format!(
                "answer has length {}, expected {}",
                raw.len(),
                self.n
            )));
        }
        let answer = raw
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidInstance(format!("answer entry {other} is not 0/1"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if !graph.is_independent(&answer) {
            return Err(Error::InvalidInstance("answer is not an independent set".into()));
        }
        let size = answer.iter().filter(|&&b| b).count();
        let mis_size = self.mis_size.unwrap_or(size);
        if mis_size != size {
            return Err(Error::InvalidInstance(format!(
                "mis_size {mis_size} differs from answer popcount {size}"
            )));
        }
        Ok(MisInstance {
            graph,
            answer,
            mis_size,
            seed: self.seed.unwrap_or(0),
            added_edges: self.added_edges.unwrap_or(0),
            verified_unique: false,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance file serializes")
    }
}

/// Parses an instance or graph document from bytes.
pub fn parse_instance_file(bytes: &[u8]) -> Result<InstanceFile> {
    Ok(serde_json::from_slice(bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::brute_force_mis;

    #[test]
    fn single_edge_labels() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let e = enumerate_all_mis(&g, 10).unwrap();
        assert_eq!(e.mis_size, 1);
        assert_eq!(e.solutions.len(), 2);
        assert_eq!(e.labels, vec![VertexLabel::NonBackbone; 2]);
    }

    #[test]
    fn path_is_all_backbone() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let e = enumerate_all_mis(&g, 10).unwrap();
        assert_eq!(e.mis_size, 2);
        assert_eq!(e.solutions, vec![vec![true, false, true]]);
        assert_eq!(
            e.labels,
            vec![VertexLabel::BackboneIn, VertexLabel::BackboneOut, VertexLabel::BackboneIn]
        );
    }

    #[test]
    fn unique_input_is_returned_unchanged() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let inst = uniquify(&g, &mut stream(1, &[]), 100).unwrap();
        assert_eq!(inst.added_edges, 0);
        assert_eq!(inst.graph, g);
        assert!(inst.verified_unique);
    }

    #[test]
    fn single_edge_is_discarded() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let err = uniquify(&g, &mut stream(1, &[]), 100).unwrap_err();
        assert!(matches!(
            err,
            Error::Discarded(DiscardReason::NoBackboneForLoneVertex)
        ));
    }

    #[test]
    fn uniquified_g12_instances_verify() {
        let mut stats = GenerationStats::default();
        for sample in 0..30 {
            let inst =
                generate_unique_instance(12, 3.0, 99, sample, 100_000, 1000, &mut stats).unwrap();
            let bf = brute_force_mis(&inst.graph).unwrap();
            assert_eq!(bf.solutions, vec![inst.answer.clone()]);
            assert_eq!(bf.mis_size, inst.mis_size);
            // Same seed regenerates the same graph before edge additions.
            let mut rng = stream(inst.seed, &[]);
            let original = generate_er_graph(12, 3.0, &mut rng).unwrap();
            assert_eq!(brute_force_mis(&original).unwrap().mis_size, inst.mis_size);
            assert!(original.edges().iter().all(|&(i, j)| inst.graph.has_edge(i, j)));
            assert_eq!(inst.graph.edge_count(), original.edge_count() + inst.added_edges);
        }
        assert!(stats.attempts >= 30);
    }

    #[test]
    fn file_roundtrip_and_validation() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let inst = uniquify(&g, &mut stream(1, &[]), 100).unwrap();
        let file = InstanceFile::from_instance(&inst);
        let parsed = parse_instance_file(file.to_json().as_bytes()).unwrap();
        let back = parsed.instance().unwrap();
        assert_eq!(back.graph, inst.graph);
        assert_eq!(back.answer, inst.answer);

        let bad = br#"{"n":3,"edges":[[0,1],[1,2]],"answer":[1,1,0],"mis_size":2}"#;
        assert!(parse_instance_file(bad).unwrap().instance().is_err());
        let bad_size = br#"{"n":3,"edges":[[0,1],[1,2]],"answer":[1,0,1],"mis_size":3}"#;
        assert!(parse_instance_file(bad_size).unwrap().instance().is_err());
        let graph_only = br#"{"n":3,"edges":[[0,1]]}"#;
        let f = parse_instance_file(graph_only).unwrap();
        assert_eq!(f.graph().unwrap().edge_count(), 1);
        assert!(f.instance().is_err());
        assert!(parse_instance_file(br#"{"n":2,"edges":[[0,0]]}"#).unwrap().graph().is_err());
        assert!(parse_instance_file(br#"{"n":2,"edges":[],"extra":1}"#).is_err());
    }
}
