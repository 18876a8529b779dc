//! Exact diagonalization in the full `2^N` z-basis.
//!
//! Basis index bit `i` set means `σ_i = +1` (vertex `i` in the set).
//! Finite-temperature traces are taken over the complete spectrum with
//! energies shifted by the ground energy.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{build_operator_table, OperatorKind, OperatorTable, ProblemHamiltonian};

/// Largest system accepted by the dense routines.
pub const MAX_ED_SITES: usize = 14;

/// Step sizes used for the fidelity second difference.
pub const RICHARDSON_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Boltzmann factors below this (relative to the ground state) are dropped
/// from traces.
const WEIGHT_CUTOFF: f64 = 1e-40;

/// Sign of the transverse term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Gauge {
    /// `H_T = −Σ σ^x`, the sign used by the Monte Carlo.
    #[default]
    Negative,
    /// `H_T = +Σ σ^x`.
    Positive,
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_ED_SITES {
        return Err(Error::SizeTooLarge { n, max: MAX_ED_SITES });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

fn problem_diagonal(h: &ProblemHamiltonian) -> Vec<f64> {
    (0..1usize << h.n()).map(|x| h.energy_of_index(x)).collect()
}

/// `H(λ) = (1−λ) H_P + λ H_T` as a dense matrix.
pub fn build_dense(h: &ProblemHamiltonian, lambda: f64) -> Result<DMatrix<f64>> {
    build_dense_with_gauge(h, lambda, Gauge::Negative)
}

pub fn build_dense_with_gauge(
    h: &ProblemHamiltonian,
    lambda: f64,
    gauge: Gauge,
) -> Result<DMatrix<f64>> {
    check_size(h.n())?;
    check_lambda(lambda)?;
    let dim = 1usize << h.n();
    let off = match gauge {
        Gauge::Negative => -lambda,
        Gauge::Positive => lambda,
    };
    let mut m = DMatrix::zeros(dim, dim);
    for (x, e) in problem_diagonal(h).into_iter().enumerate() {
        m[(x, x)] = (1.0 - lambda) * e;
        for i in 0..h.n() {
            m[(x ^ (1 << i), x)] = off;
        }
    }
    Ok(m)
}

/// Rebuilds `H(λ) = C(λ) − Σ_k W_k` from the Monte Carlo operator table.
pub fn dense_from_table(table: &OperatorTable) -> Result<DMatrix<f64>> {
    let n = table.n_sites();
    check_size(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::from_diagonal_element(dim, dim, table.constant());
    for x in 0..dim {
        let spins: Vec<i8> = (0..n).map(|i| if x >> i & 1 == 1 { 1 } else { -1 }).collect();
        for k in 0..table.len() {
            m[(x, x)] -= table.diagonal_weight(k, &spins);
            if let OperatorKind::Transverse { site } = table.entry(k) {
                m[(x ^ (1 << site), x)] -= table.weight(k);
            }
        }
    }
    Ok(m)
}

/// Applies `V = ∂H/∂λ = H_T − H_P` to each column of `u`.
fn apply_derivative(diag: &[f64], n: usize, u: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = diag.len();
    let mut out = DMatrix::zeros(dim, u.ncols());
    for c in 0..u.ncols() {
        let col = u.column(c);
        let mut dst = out.column_mut(c);
        for x in 0..dim {
            let mut acc = -diag[x] * col[x];
            for i in 0..n {
                acc -= col[x ^ (1 << i)];
            }
            dst[x] = acc;
        }
    }
    out
}

/// Ascending eigenvalues and orthonormal eigenvectors of `H(λ)`.
#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    pub lambda: f64,
    pub n_sites: usize,
    pub values: DVector<f64>,
    /// Column `m` is the eigenvector of `values[m]`.
    pub vectors: DMatrix<f64>,
}

impl DenseSpectrum {
    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    /// `E_1 − E_0`, zero for a one-dimensional space.
    pub fn gap(&self) -> f64 {
        if self.values.len() > 1 {
            self.values[1] - self.values[0]
        } else {
            0.0
        }
    }

    pub fn ground_state(&self) -> DVector<f64> {
        self.vectors.column(0).into_owned()
    }

    /// Largest `|H v − E v|` entry over all eigenpairs.
    pub fn residual(&self, h: &DMatrix<f64>) -> f64 {
        let hv = h * &self.vectors;
        let mut worst = 0.0f64;
        for m in 0..self.values.len() {
            for x in 0..self.values.len() {
                worst = worst.max((hv[(x, m)] - self.values[m] * self.vectors[(x, m)]).abs());
            }
        }
        worst
    }

    /// `exp(−β (E_m − E_0))` for every level.
    pub fn boltzmann(&self, beta: f64) -> Vec<f64> {
        let e0 = self.ground_energy();
        self.values.iter().map(|e| (-beta * (e - e0)).exp()).collect()
    }

    fn significant(&self, beta: f64) -> Vec<usize> {
        let e0 = self.ground_energy();
        (0..self.values.len())
            .filter(|&m| (-beta * (self.values[m] - e0)).exp() > WEIGHT_CUTOFF)
            .collect()
    }
}

pub fn diagonalize_matrix(m: DMatrix<f64>, lambda: f64, n_sites: usize) -> DenseSpectrum {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let dim = order.len();
    DenseSpectrum {
        lambda,
        n_sites,
        values: DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i])),
        vectors: DMatrix::from_fn(dim, dim, |x, j| eig.eigenvectors[(x, order[j])]),
    }
}

pub fn diagonalize(h: &ProblemHamiltonian, lambda: f64) -> Result<DenseSpectrum> {
    Ok(diagonalize_matrix(build_dense(h, lambda)?, lambda, h.n()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub lambda: f64,
    pub e0: f64,
    pub gap: f64,
}

pub fn gap_profile(h: &ProblemHamiltonian, lambdas: &[f64]) -> Result<Vec<GapPoint>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let s = diagonalize(h, lambda)?;
            Ok(GapPoint {
                lambda,
                e0: s.ground_energy(),
                gap: s.gap(),
            })
        })
        .collect()
}

/// The grid point with the smallest gap.
pub fn min_gap(profile: &[GapPoint]) -> Option<GapPoint> {
    profile.iter().copied().min_by(|a, b| a.gap.total_cmp(&b.gap))
}

/// Finite-temperature fidelity between the Gibbs states of two spectra:
/// `F = sqrt(Tr[ρ_a^{1/2} ρ_b^{1/2}])`.
pub fn fidelity_between(a: &DenseSpectrum, b: &DenseSpectrum, beta: f64) -> f64 {
    let half = 0.5 * beta;
    let (sa, sb) = (a.significant(half), b.significant(half));
    let wa: Vec<f64> = a.boltzmann(half);
    let wb: Vec<f64> = b.boltzmann(half);
    let ua = a.vectors.select_columns(&sa);
    let ub = b.vectors.select_columns(&sb);
    let overlap = ua.transpose() * ub;
    let mut num = 0.0;
    for (j, &n) in sb.iter().enumerate() {
        for (i, &m) in sa.iter().enumerate() {
            num += wa[m] * wb[n] * overlap[(i, j)].powi(2);
        }
    }
    let za: f64 = a.boltzmann(beta).iter().sum();
    let zb: f64 = b.boltzmann(beta).iter().sum();
    (num / (za * zb).sqrt()).sqrt()
}

pub fn finite_t_fidelity(h: &ProblemHamiltonian, lambda: f64, eps: f64, beta: f64) -> Result<f64> {
    let a = diagonalize(h, lambda)?;
    let b = diagonalize(h, lambda + eps)?;
    Ok(fidelity_between(&a, &b, beta))
}

/// `|⟨GS(a)|GS(b)⟩|`.
pub fn ground_state_fidelity(a: &DenseSpectrum, b: &DenseSpectrum) -> f64 {
    a.vectors.column(0).dot(&b.vectors.column(0)).abs()
}

/// Two Richardson levels over the step sequence `eps, eps/2, eps/4`.
pub fn richardson(values: [f64; 3]) -> f64 {
    let r1 = (4.0 * values[1] - values[0]) / 3.0;
    let r2 = (4.0 * values[2] - values[1]) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

fn chi_f_by_differences(
    h: &ProblemHamiltonian,
    lambda: f64,
    fidelity: impl Fn(&DenseSpectrum, &DenseSpectrum) -> f64,
) -> Result<f64> {
    let base = diagonalize(h, lambda)?;
    let mut estimates = [0.0; 3];
    for (slot, eps) in estimates.iter_mut().zip(RICHARDSON_STEPS) {
        let up = diagonalize(h, lambda + eps)?;
        let down = diagonalize(h, lambda - eps)?;
        let f = 0.5 * (fidelity(&base, &up) + fidelity(&base, &down));
        *slot = 2.0 * (1.0 - f) / (eps * eps);
    }
    Ok(richardson(estimates))
}

/// `lim 2(1 − F)/ε²` of the thermal fidelity by symmetric differences and
/// Richardson extrapolation. Requires `λ ± 10⁻²` inside `[0, 1]`.
pub fn chi_f_richardson(h: &ProblemHamiltonian, lambda: f64, beta: f64) -> Result<f64> {
    chi_f_by_differences(h, lambda, |a, b| fidelity_between(a, b, beta))
}

/// Ground-state counterpart of [`chi_f_richardson`].
pub fn chi_f_ground_richardson(h: &ProblemHamiltonian, lambda: f64) -> Result<f64> {
    chi_f_by_differences(h, lambda, ground_state_fidelity)
}

/// `Σ_{m≠0} |⟨m|∂_λH|0⟩|² / (E_m − E_0)²`.
pub fn chi_f_perturbative(h: &ProblemHamiltonian, spec: &DenseSpectrum) -> f64 {
    let diag = problem_diagonal(h);
    let v0 = apply_derivative(&diag, h.n(), &spec.vectors.columns(0, 1).into_owned());
    let proj = spec.vectors.transpose() * v0;
    (1..spec.values.len())
        .map(|m| proj[(m, 0)].powi(2) / (spec.values[m] - spec.values[0]).powi(2))
        .sum()
}

/// `w · ∫_0^s (s−u) e^{−uΔ} du` with `w = e^{−βa}`, evaluated without
/// overflow for either sign of `Δ`.
fn weighted_kernel(beta_a: f64, s: f64, delta: f64) -> f64 {
    let x = s * delta;
    let w = (-beta_a).exp();
    if x.abs() < 0.05 {
        let mut term = 0.5;
        let mut sum = 0.0;
        for k in 0..12 {
            sum += term;
            term *= -x / (k as f64 + 3.0);
        }
        w * s * s * sum
    } else {
        w * (s / delta - 1.0 / (delta * delta)) + (-beta_a - x).exp() / (delta * delta)
    }
}

/// Closed-form second-order expansion of the thermal fidelity in the
/// energy eigenbasis: the exact `ε → 0` limit of [`chi_f_richardson`].
pub fn chi_f_spectral(h: &ProblemHamiltonian, spec: &DenseSpectrum, beta: f64) -> f64 {
    let e0 = spec.ground_energy();
    let dim = spec.values.len();
    let sel = spec.significant(beta);
    let diag = problem_diagonal(h);
    let vu = apply_derivative(&diag, h.n(), &spec.vectors.select_columns(&sel));
    // rows: all levels n, columns: significant levels m
    let v = spec.vectors.transpose() * vu;
    let weights = spec.boltzmann(beta);
    let z: f64 = weights.iter().sum();
    let mut inside = vec![false; dim];
    for &m in &sel {
        inside[m] = true;
    }
    let pair = |m: usize, n: usize| {
        let a = beta * (spec.values[m] - e0);
        let delta = spec.values[n] - spec.values[m];
        0.5 * weighted_kernel(a, beta, delta) - weighted_kernel(a, 0.5 * beta, delta)
    };
    let mut total = 0.0;
    let mut mean_v = 0.0;
    for (j, &m) in sel.iter().enumerate() {
        mean_v += weights[m] * v[(m, j)];
        for n in 0..dim {
            let v2 = v[(n, j)].powi(2);
            total += v2 * pair(m, n);
            if !inside[n] {
                total += v2 * pair(n, m);
            }
        }
    }
    mean_v /= z;
    total / z - beta * beta * mean_v * mean_v / 8.0
}

/// Exact thermal averages at one `(λ, β)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalObservables {
    pub energy: f64,
    /// `(1/N) Σ_i ⟨σ_i⟩²`.
    pub q: f64,
    /// Probability of the answer basis state; `NaN` without an answer.
    pub p_ans: f64,
    /// Mean SSE string length `β (C(λ) − ⟨H⟩)`.
    pub n_mean: f64,
    pub magnetization: Vec<f64>,
}

/// Diagonal of the Gibbs state in the z-basis.
pub fn basis_probabilities(spec: &DenseSpectrum, beta: f64) -> Vec<f64> {
    let weights = spec.boltzmann(beta);
    let z: f64 = weights.iter().sum();
    let dim = spec.values.len();
    let mut p = vec![0.0; dim];
    for m in spec.significant(beta) {
        let w = weights[m] / z;
        for (x, px) in p.iter_mut().enumerate() {
            *px += w * spec.vectors[(x, m)].powi(2);
        }
    }
    p
}

pub fn thermal_observables(
    h: &ProblemHamiltonian,
    spec: &DenseSpectrum,
    beta: f64,
    answer_index: Option<usize>,
) -> Result<ThermalObservables> {
    let weights = spec.boltzmann(beta);
    let z: f64 = weights.iter().sum();
    let energy = spec
        .values
        .iter()
        .zip(&weights)
        .map(|(e, w)| e * w)
        .sum::<f64>()
        / z;
    let p = basis_probabilities(spec, beta);
    let n = spec.n_sites;
    let magnetization: Vec<f64> = (0..n)
        .map(|i| {
            p.iter()
                .enumerate()
                .map(|(x, px)| if x >> i & 1 == 1 { *px } else { -px })
                .sum()
        })
        .collect();
    let q = if n == 0 {
        0.0
    } else {
        magnetization.iter().map(|m| m * m).sum::<f64>() / n as f64
    };
    let p_ans = answer_index.map_or(f64::NAN, |a| p[a]);
    let constant = build_operator_table(h, spec.lambda)?.constant();
    Ok(ThermalObservables {
        energy,
        q,
        p_ans,
        n_mean: beta * (constant - energy),
        magnetization,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RenyiOrder {
    Finite(f64),
    Infinite,
}

/// `S_n = log2(Σ_x p_x^n) / (1 − n)` of the basis distribution `p_x = |ψ_x|²`;
/// `n = 1` is the Shannon entropy and `n = ∞` gives `−log2 max_x p_x`.
pub fn renyi_entropy(amplitudes: &[f64], order: RenyiOrder) -> f64 {
    let probs = amplitudes.iter().map(|a| a * a);
    match order {
        RenyiOrder::Infinite => -probs.fold(0.0, f64::max).log2(),
        RenyiOrder::Finite(n) if (n - 1.0).abs() < 1e-12 => {
            -probs.filter(|&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
        }
        RenyiOrder::Finite(n) => probs.map(|p| p.powf(n)).sum::<f64>().log2() / (1.0 - n),
    }
}

/// All exact quantities at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdPoint {
    pub lambda: f64,
    pub e0: f64,
    pub gap: f64,
    pub observables: ThermalObservables,
    /// `NaN` at `λ ∈ {0, 1}`.
    pub chi_f: f64,
}

pub fn ed_point(
    h: &ProblemHamiltonian,
    lambda: f64,
    beta: f64,
    answer_index: Option<usize>,
) -> Result<EdPoint> {
    let spec = diagonalize(h, lambda)?;
    let chi_f = if lambda > 0.0 && lambda < 1.0 {
        chi_f_spectral(h, &spec, beta)
    } else {
        f64::NAN
    };
    Ok(EdPoint {
        lambda,
        e0: spec.ground_energy(),
        gap: spec.gap(),
        observables: thermal_observables(h, &spec, beta, answer_index)?,
        chi_f,
    })
}

/// Exact counterpart of a result row, with ground energy and gap appended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdRow {
    pub instance_id: String,
    pub lambda: f64,
    pub q: f64,
    pub q_err: f64,
    #[serde(rename = "chiF")]
    pub chi_f: f64,
    #[serde(rename = "chiF_err")]
    pub chi_f_err: f64,
    pub p_ans: f64,
    pub p_ans_err: f64,
    pub energy: f64,
    pub energy_err: f64,
    pub n_mean: f64,
    pub samples: u64,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub gap: f64,
}

impl EdRow {
    pub fn new(instance_id: &str, p: &EdPoint) -> Self {
        EdRow {
            instance_id: instance_id.to_string(),
            lambda: p.lambda,
            q: p.observables.q,
            q_err: 0.0,
            chi_f: p.chi_f,
            chi_f_err: 0.0,
            p_ans: p.observables.p_ans,
            p_ans_err: 0.0,
            energy: p.observables.energy,
            energy_err: 0.0,
            n_mean: p.observables.n_mean,
            samples: 0,
            e0: p.e0,
            gap: p.gap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::hamiltonian::build_problem;

    fn problem(n: usize, edges: &[(usize, usize)]) -> ProblemHamiltonian {
        build_problem(&Graph::from_edges(n, edges.iter().copied()).unwrap(), 2.0).unwrap()
    }

    #[test]
    fn single_vertex_matrices() {
        let h = problem(1, &[]);
        let m0 = build_dense(&h, 0.0).unwrap();
        assert_eq!(m0[(0, 0)], 0.5);
        assert_eq!(m0[(1, 1)], -0.5);
        assert_eq!(m0[(0, 1)], 0.0);
        let s1 = diagonalize(&h, 1.0).unwrap();
        assert!((s1.values[0] + 1.0).abs() < 1e-12);
        assert!((s1.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_limit() {
        let h = problem(15, &[]);
        assert!(matches!(build_dense(&h, 0.5), Err(Error::SizeTooLarge { .. })));
    }

    #[test]
    fn table_reconstruction_matches() {
        let h = problem(4, &[(0, 1), (1, 2), (2, 3), (0, 2)]);
        for lambda in [0.0, 0.2, 0.7, 1.0] {
            let a = build_dense(&h, lambda).unwrap();
            let b = dense_from_table(&build_operator_table(&h, lambda).unwrap()).unwrap();
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn eigenpairs_are_accurate() {
        let h = problem(5, &[(0, 1), (1, 2), (3, 4)]);
        let m = build_dense(&h, 0.4).unwrap();
        let s = diagonalize_matrix(m.clone(), 0.4, 5);
        assert!(s.residual(&m) < 1e-10);
        assert!(s.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
        let gram = s.vectors.transpose() * &s.vectors;
        assert!((gram - DMatrix::identity(32, 32)).amax() < 1e-10);
    }

    #[test]
    fn gap_endpoints() {
        let h = problem(3, &[(0, 1), (1, 2)]);
        let p = gap_profile(&h, &[0.0, 1.0]).unwrap();
        assert!((p[1].gap - 2.0).abs() < 1e-10);
        assert!((p[1].e0 + 3.0).abs() < 1e-10);
        assert!(p[0].gap > 0.0);
    }

    #[test]
    fn fidelity_identities() {
        let h = problem(3, &[(0, 1), (1, 2)]);
        assert!((finite_t_fidelity(&h, 0.4, 0.0, 5.0).unwrap() - 1.0).abs() < 1e-12);
        let a = finite_t_fidelity(&h, 0.4, 0.05, 5.0).unwrap();
        let b = finite_t_fidelity(&h, 0.45, -0.05, 5.0).unwrap();
        assert!((a - b).abs() < 1e-13);
        assert!(a < 1.0);
    }

    #[test]
    fn spectral_chi_f_matches_differences() {
        let h = problem(4, &[(0, 1), (1, 2), (2, 3)]);
        for beta in [0.5, 4.0, 16.0] {
            for lambda in [0.1, 0.35, 0.8] {
                let spec = diagonalize(&h, lambda).unwrap();
                let a = chi_f_spectral(&h, &spec, beta);
                let b = chi_f_richardson(&h, lambda, beta).unwrap();
                assert!((a - b).abs() < 1e-6 * a.abs().max(1e-3), "{beta} {lambda}: {a} {b}");
            }
        }
    }

    #[test]
    fn ground_state_limit() {
        let h = problem(3, &[(0, 1), (1, 2)]);
        for lambda in [0.2, 0.5] {
            let spec = diagonalize(&h, lambda).unwrap();
            let pert = chi_f_perturbative(&h, &spec);
            let rich = chi_f_ground_richardson(&h, lambda).unwrap();
            assert!((pert - rich).abs() < 1e-6 * pert);
            let hot = chi_f_spectral(&h, &spec, 40.0);
            assert!((hot - pert).abs() < 1e-4 * pert);
        }
    }

    #[test]
    fn thermal_limits() {
        let h = problem(3, &[(0, 1), (1, 2)]);
        let answer = 0b101;
        let s0 = diagonalize(&h, 0.0).unwrap();
        let t0 = thermal_observables(&h, &s0, 60.0, Some(answer)).unwrap();
        assert!((t0.p_ans - 1.0).abs() < 1e-12);
        assert!((t0.q - 1.0).abs() < 1e-12);
        let s1 = diagonalize(&h, 1.0).unwrap();
        let t1 = thermal_observables(&h, &s1, 60.0, Some(answer)).unwrap();
        assert!((t1.p_ans - 0.125).abs() < 1e-12);
        assert!(t1.q.abs() < 1e-12);
        assert!((t1.energy + 3.0).abs() < 1e-12);
    }

    #[test]
    fn gauge_does_not_change_spectrum() {
        let h = problem(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]);
        for lambda in [0.1, 0.5, 0.9] {
            let a = diagonalize_matrix(build_dense(&h, lambda).unwrap(), lambda, 6);
            let b = diagonalize_matrix(
                build_dense_with_gauge(&h, lambda, Gauge::Positive).unwrap(),
                lambda,
                6,
            );
            assert!((a.values - b.values).amax() < 1e-10);
        }
    }

    #[test]
    fn renyi_orders() {
        let uniform = [0.5; 4];
        for order in [RenyiOrder::Finite(0.5), RenyiOrder::Finite(1.0), RenyiOrder::Finite(2.0), RenyiOrder::Infinite] {
            assert!((renyi_entropy(&uniform, order) - 2.0).abs() < 1e-12);
        }
        let peaked = [0.8f64.sqrt(), 0.2f64.sqrt()];
        assert!((renyi_entropy(&peaked, RenyiOrder::Infinite) + 0.8f64.log2()).abs() < 1e-12);
        assert!(renyi_entropy(&peaked, RenyiOrder::Finite(2.0)) >= renyi_entropy(&peaked, RenyiOrder::Infinite));
    }
}
