//! MIS problem Hamiltonian, annealing interpolation, and the SSE operator
//! decomposition.
//!
//! Spins are `+1` for vertices in the set. The problem Hamiltonian is
//! `H_P = (c/4) Σ_edges σ_i σ_j − Σ_i h_i σ_i` with `h_i = (2 − c d_i)/4`,
//! and `H(λ) = (1 − λ) H_P + λ H_T`. The driver is taken in the gauge
//! `H_T = −Σ σ^x` (a `σ^x → −σ^x` rotation on every site), which leaves the
//! spectrum and every z-diagonal observable unchanged and makes all SSE
//! weights non-negative.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Penalty constant used throughout.
pub const DEFAULT_PENALTY: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemHamiltonian {
    n: usize,
    penalty: f64,
    bonds: Vec<(usize, usize)>,
    fields: Vec<f64>,
}

impl ProblemHamiltonian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// Coupling `J = c/4`, identical on every edge.
    pub fn coupling(&self) -> f64 {
        self.penalty / 4.0
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// Longitudinal fields `h_i`.
    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    /// Classical energy `E(σ) = Σ J σ_i σ_j − Σ h_i σ_i`.
    pub fn classical_energy(&self, spins: &[i8]) -> f64 {
        assert_eq!(spins.len(), self.n, "spin configuration has wrong length");
        let j = self.coupling();
        let bond: f64 = self
            .bonds
            .iter()
            .map(|&(a, b)| j * f64::from(spins[a] * spins[b]))
            .sum();
        let field: f64 = self
            .fields
            .iter()
            .zip(spins)
            .map(|(h, &s)| h * f64::from(s))
            .sum();
        bond - field
    }

    /// Classical energy of the basis state whose bit `i` is set when spin `i`
    /// is up.
    pub fn energy_of_index(&self, index: usize) -> f64 {
        let spin = |i: usize| if index >> i & 1 == 1 { 1.0 } else { -1.0 };
        let j = self.coupling();
        let bond: f64 = self.bonds.iter().map(|&(a, b)| j * spin(a) * spin(b)).sum();
        let field: f64 = self.fields.iter().enumerate().map(|(i, h)| h * spin(i)).sum();
        bond - field
    }
}

/// Problem Hamiltonian of the MIS instance on `g` with penalty `c > 1`.
pub fn build_problem(g: &Graph, penalty: f64) -> Result<ProblemHamiltonian> {
    if penalty <= 1.0 || !penalty.is_finite() {
        return Err(Error::InvalidParameter(format!("penalty must exceed 1, got {penalty}")));
    }
    Ok(ProblemHamiltonian {
        n: g.n(),
        penalty,
        bonds: g.edges().to_vec(),
        fields: (0..g.n())
            .map(|v| (2.0 - penalty * g.degree(v) as f64) / 4.0)
            .collect(),
    })
}

/// Which Hamiltonian an operator comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorClass {
    /// Carries a factor `1 − λ` (bond and field operators).
    Problem,
    /// Carries a factor `λ`.
    Transverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// `(1−λ)(c/4)(1 − σ_i σ_j)`: weight `(1−λ)c/2` on antiparallel spins.
    Bond { i: u32, j: u32 },
    /// `(1−λ)|h|(1 + sign σ)`: weight `2(1−λ)|h|` when the spin is along
    /// `sign`.
    Field { site: u32, sign: i8 },
    /// `λ(1 + σ^x)`: appears either as the constant diagonal part or as a
    /// spin flip, both of weight `λ`.
    Transverse { site: u32 },
}

impl OperatorKind {
    pub fn class(&self) -> OperatorClass {
        match self {
            OperatorKind::Transverse { .. } => OperatorClass::Transverse,
            _ => OperatorClass::Problem,
        }
    }

    /// Whether the diagonal operator has nonzero weight on `spins`.
    #[inline]
    pub fn allows(&self, spins: &[i8]) -> bool {
        match *self {
            OperatorKind::Bond { i, j } => spins[i as usize] != spins[j as usize],
            OperatorKind::Field { site, sign } => spins[site as usize] == sign,
            OperatorKind::Transverse { .. } => true,
        }
    }
}

/// SSE decomposition `−H(λ) + C(λ) = Σ_k W_k`.
///
/// The entry layout (bonds, then fields, then one transverse entry per site)
/// depends only on the problem, never on `λ`, so operator indices stay valid
/// when configurations move between tables at different `λ`.
#[derive(Clone, Debug)]
pub struct OperatorTable {
    lambda: f64,
    entries: Vec<OperatorKind>,
    weights: Vec<f64>,
    constant: f64,
    total: f64,
    picker: Option<WeightedIndex<f64>>,
    n_sites: usize,
}

impl OperatorTable {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn entries(&self) -> &[OperatorKind] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> OperatorKind {
        self.entries[k]
    }

    /// Nonzero weight of entry `k` (the only other value it takes is 0).
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// Weight of entry `k` acting diagonally on `spins`.
    pub fn diagonal_weight(&self, k: usize, spins: &[i8]) -> f64 {
        if self.entries[k].allows(spins) {
            self.weights[k]
        } else {
            0.0
        }
    }

    /// The constant `C(λ)` added to `−H(λ)`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Sum of the nonzero weights of all entries.
    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index of the transverse entry on `site`.
    pub fn transverse_index(&self, site: usize) -> usize {
        self.entries.len() - self.n_sites + site
    }

    /// Draws an entry with probability proportional to its nonzero weight.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        self.picker.as_ref().map(|p| p.sample(rng))
    }
}

/// Operator table of `H(λ)` for `0 ≤ λ ≤ 1`. Vertices with `h_i = 0` get no
/// field entry.
pub fn build_operator_table(h: &ProblemHamiltonian, lambda: f64) -> Result<OperatorTable> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
    }
    let problem = 1.0 - lambda;
    let mut entries = Vec::with_capacity(h.bonds.len() + 2 * h.n);
    let mut weights = Vec::with_capacity(entries.capacity());
    let mut constant = 0.0;

    let j = h.coupling();
    for &(a, b) in &h.bonds {
        entries.push(OperatorKind::Bond {
            i: a as u32,
            j: b as u32,
        });
        weights.push(2.0 * problem * j);
        constant += problem * j;
    }
    for (site, &field) in h.fields.iter().enumerate() {
        if field != 0.0 {
            entries.push(OperatorKind::Field {
                site: site as u32,
                sign: if field > 0.0 { 1 } else { -1 },
            });
            weights.push(2.0 * problem * field.abs());
            constant += problem * field.abs();
        }
    }
    for site in 0..h.n {
        entries.push(OperatorKind::Transverse { site: site as u32 });
        weights.push(lambda);
        constant += lambda;
    }

    let total: f64 = weights.iter().sum();
    let picker = if total > 0.0 {
        Some(WeightedIndex::new(&weights).expect("non-negative weights with positive sum"))
    } else {
        None
    };
    Ok(OperatorTable {
        lambda,
        entries,
        weights,
        constant,
        total,
        picker,
        n_sites: h.n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn isolated_vertex_prefers_in() {
        let h = build_problem(&Graph::empty(1), 2.0).unwrap();
        assert!(approx(h.fields()[0], 0.5));
        assert!(approx(h.classical_energy(&[1]), -0.5));
        assert!(approx(h.classical_energy(&[-1]), 0.5));
    }

    #[test]
    fn single_edge_has_zero_fields() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let h = build_problem(&g, 2.0).unwrap();
        assert_eq!(h.fields(), &[0.0, 0.0]);
        assert!(approx(h.coupling(), 0.5));
        assert!(approx(h.classical_energy(&[1, -1]), -0.5));
        assert!(approx(h.classical_energy(&[-1, 1]), -0.5));
        assert!(approx(h.classical_energy(&[1, 1]), 0.5));
    }

    #[test]
    fn triangle_energy() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let h = build_problem(&g, 2.0).unwrap();
        assert!(approx(h.classical_energy(&[1, -1, -1]), -1.0));
        assert!(approx(h.energy_of_index(0b001), -1.0));
    }

    #[test]
    fn empty_graph_energy() {
        let h = build_problem(&Graph::empty(4), 2.0).unwrap();
        for spins in [[1, 1, 1, 1], [1, -1, -1, 1], [-1, -1, -1, -1]] {
            let sum: i8 = spins.iter().sum();
            assert!(approx(h.classical_energy(&spins), -0.5 * f64::from(sum)));
        }
    }

    #[test]
    fn adding_isolated_up_vertex_lowers_energy_by_half() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let mut bigger = Graph::empty(4);
        for &(a, b) in g.edges() {
            bigger.add_edge(a, b).unwrap();
        }
        let h3 = build_problem(&g, 2.0).unwrap();
        let h4 = build_problem(&bigger, 2.0).unwrap();
        for idx in 0..8usize {
            let spins: Vec<i8> = (0..3).map(|i| if idx >> i & 1 == 1 { 1 } else { -1 }).collect();
            let mut ext = spins.clone();
            ext.push(1);
            assert!(approx(h4.classical_energy(&ext), h3.classical_energy(&spins) - 0.5));
        }
    }

    #[test]
    fn penalty_must_exceed_one() {
        assert!(build_problem(&Graph::empty(2), 1.0).is_err());
        assert!(build_problem(&Graph::empty(2), f64::NAN).is_err());
    }

    #[test]
    fn endpoint_tables() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let h = build_problem(&g, 2.0).unwrap();
        let t1 = build_operator_table(&h, 1.0).unwrap();
        for k in 0..t1.len() {
            match t1.entry(k) {
                OperatorKind::Transverse { .. } => assert!(approx(t1.weight(k), 1.0)),
                _ => assert_eq!(t1.weight(k), 0.0),
            }
        }
        let t0 = build_operator_table(&h, 0.0).unwrap();
        for k in 0..t0.len() {
            if let OperatorKind::Transverse { .. } = t0.entry(k) {
                assert_eq!(t0.weight(k), 0.0);
            }
        }
        assert!(build_operator_table(&h, 1.5).is_err());
    }

    #[test]
    fn field_entries_only_for_nonzero_fields() {
        // Path: endpoints have degree 1 and h = 0; the middle has h = -0.5.
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let h = build_problem(&g, 2.0).unwrap();
        let t = build_operator_table(&h, 0.3).unwrap();
        let fields: Vec<_> = t
            .entries()
            .iter()
            .filter(|e| matches!(e, OperatorKind::Field { .. }))
            .collect();
        assert_eq!(fields, vec![&OperatorKind::Field { site: 1, sign: -1 }]);
        assert_eq!(t.transverse_index(2), t.len() - 1);
    }

    #[test]
    fn layout_is_lambda_independent() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let h = build_problem(&g, 2.0).unwrap();
        let a = build_operator_table(&h, 0.1).unwrap();
        let b = build_operator_table(&h, 0.9).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn weights_nonnegative_and_two_valued() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3), (0, 4)]).unwrap();
        let h = build_problem(&g, 2.0).unwrap();
        for step in 0..=20 {
            let t = build_operator_table(&h, step as f64 / 20.0).unwrap();
            for idx in 0..32usize {
                let spins: Vec<i8> = (0..5).map(|i| if idx >> i & 1 == 1 { 1 } else { -1 }).collect();
                for k in 0..t.len() {
                    let w = t.diagonal_weight(k, &spins);
                    assert!(w >= 0.0);
                    assert!(w == 0.0 || w == t.weight(k));
                }
            }
        }
    }
}
