//! Simple undirected graphs and the Erdős–Rényi ensemble.

use rand::Rng;

use crate::bitset::VertexSet;
use crate::error::{Error, Result};

/// Undirected simple graph on vertices `0..n`.
///
/// Neighbor lists are kept sorted; the edge list holds each edge once as
/// `(i, j)` with `i < j`, in insertion order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adjacency: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    /// Builds a graph, rejecting self-loops, duplicates and out-of-range
    /// endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph must have at least one vertex".into()));
        }
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            if !g.add_edge(i, j)? {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(g)
    }

    /// Adds edge `{i, j}`. Returns `false` if it was already present.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<bool> {
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidGraph(format!(
                "edge ({i}, {j}) out of range for {} vertices",
                self.n
            )));
        }
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
        }
        match self.adjacency[i].binary_search(&j) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.adjacency[i].insert(pos, j);
                let pos_j = self.adjacency[j].binary_search(&i).unwrap_err();
                self.adjacency[j].insert(pos_j, i);
                self.edges.push((i.min(j), i.max(j)));
                Ok(true)
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    /// Neighborhoods as bitsets, for the solvers.
    pub fn adjacency_sets(&self) -> Vec<VertexSet> {
        self.adjacency
            .iter()
            .map(|nb| VertexSet::from_members(self.n, nb.iter().copied()))
            .collect()
    }

    /// True if no edge has both endpoints selected.
    pub fn is_independent(&self, selected: &[bool]) -> bool {
        selected.len() == self.n && self.edges.iter().all(|&(i, j)| !(selected[i] && selected[j]))
    }
}

/// Samples G(n, p) with `p = degree / (n - 1)`, so that the expected mean
/// degree is `degree`.
pub fn generate_er_graph<R: Rng + ?Sized>(n: usize, degree: f64, rng: &mut R) -> Result<Graph> {
    validate_er_params(n, degree)?;
    let p = (degree / (n - 1) as f64).min(1.0);
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

pub fn validate_er_params(n: usize, degree: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 vertices, got {n}")));
    }
    if !(degree > 0.0 && degree <= (n - 1) as f64) {
        return Err(Error::InvalidParameter(format!(
            "mean degree {degree} outside (0, {}]",
            n - 1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn rejects_malformed_edges() {
        assert!(Graph::from_edges(3, [(0, 0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3)]).is_err());
        assert!(Graph::from_edges(0, []).is_err());
    }

    #[test]
    fn degrees_match_edges() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (1, 3)]).unwrap();
        assert_eq!(g.degree(1), 3);
        assert_eq!(g.degree(0), 1);
        assert_eq!((0..4).map(|v| g.degree(v)).sum::<usize>(), 2 * g.edge_count());
        assert!(g.has_edge(3, 1));
        assert!(!g.has_edge(0, 3));
    }

    #[test]
    fn two_vertices_full_probability() {
        let mut rng = stream(1, &[]);
        for _ in 0..20 {
            let g = generate_er_graph(2, 1.0, &mut rng).unwrap();
            assert_eq!(g.edge_count(), 1);
        }
    }

    #[test]
    fn er_parameter_validation() {
        let mut rng = stream(1, &[]);
        assert!(generate_er_graph(1, 0.5, &mut rng).is_err());
        assert!(generate_er_graph(10, 0.0, &mut rng).is_err());
        assert!(generate_er_graph(10, 9.5, &mut rng).is_err());
    }

    #[test]
    fn er_mean_edge_count() {
        // Edge count is Binomial(190, 3/19): mean 30, variance 30 * 16/19.
        let (n, d, draws) = (20usize, 3.0, 10_000usize);
        let pairs = (n * (n - 1) / 2) as f64;
        let p = d / (n - 1) as f64;
        let mean = pairs * p;
        let sd = (pairs * p * (1.0 - p)).sqrt();
        let mut rng = stream(2024, &[]);
        let total: usize = (0..draws)
            .map(|_| generate_er_graph(n, d, &mut rng).unwrap().edge_count())
            .sum();
        let observed = total as f64 / draws as f64;
        let stderr = sd / (draws as f64).sqrt();
        assert!((mean - 30.0).abs() < 1e-12);
        assert!(
            (observed - mean).abs() < 3.0 * stderr,
            "mean edges {observed} vs {mean} +- {stderr}"
        );
    }
}
