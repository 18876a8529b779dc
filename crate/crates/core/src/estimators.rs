//! Observables measured on SSE configurations.
//!
//! * energy: `⟨H⟩ = C(λ) − ⟨n⟩/β`;
//! * fidelity susceptibility from the covariances of operator counts on the
//!   two sides of a binomially placed cut in the operator sequence;
//! * overlap `q = (1/N) Σ_i σ_i^(1) σ_i^(2)` between independent replicas;
//! * answer probability `⟨P_ans⟩` and `S_ans = −log2 ⟨P_ans⟩`.
//!
//! Raw sums are kept per measurement block; nonlinear estimates use a
//! delete-one-block jackknife.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{OperatorClass, OperatorKind, OperatorTable};
use crate::sse::{SseState, Slot};

/// How diagonal observables are read off the propagated states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelMode {
    /// Average over every propagated state of the configuration.
    #[default]
    AllLevels,
    /// One uniformly chosen propagated state.
    RandomLevel,
}

/// Operator counts on the two sides of a cut.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub k_left: u64,
    pub k_right: u64,
    pub l_left: u64,
    pub l_right: u64,
}

impl SplitCounts {
    pub fn k(&self) -> u64 {
        self.k_left + self.k_right
    }

    pub fn l(&self) -> u64 {
        self.l_left + self.l_right
    }
}

/// Everything measured from one configuration in one pass over the string.
#[derive(Clone, Debug)]
pub struct ConfigurationSample {
    pub n_ops: u64,
    pub split: SplitCounts,
    pub p_ans: f64,
    /// Per-site `σ_i` at the sampled level(s).
    pub magnetization: Vec<f64>,
}

/// Walks the operator string once.
///
/// The cut position is drawn from `Binomial(n, 1/2)` over the `n + 1`
/// division points; levels `0..n` are the propagated states before each
/// operator (the state after the last one equals the first).
pub fn sample_configuration<R: Rng + ?Sized>(
    state: &SseState,
    table: &OperatorTable,
    answer: &[i8],
    mode: LevelMode,
    rng: &mut R,
) -> ConfigurationSample {
    let n = state.n_ops();
    let n_sites = state.n_sites();
    let cut = if n == 0 {
        0
    } else {
        Binomial::new(n as u64, 0.5)
            .expect("valid binomial")
            .sample(rng) as usize
    };
    let levels = n.max(1);
    let chosen_level = match mode {
        LevelMode::AllLevels => None,
        LevelMode::RandomLevel => Some(rng.random_range(0..levels)),
    };

    let mut spins = state.spins().to_vec();
    let mut mismatches = spins.iter().zip(answer).filter(|(a, b)| a != b).count();
    let mut hits = 0usize;
    let mut since = vec![0usize; n_sites];
    let mut sums = vec![0i64; n_sites];
    let mut split = SplitCounts::default();
    let mut level = 0usize;

    let mut snapshot = None;
    for slot in state.slots() {
        let Some(k) = slot.operator() else { continue };
        if chosen_level == Some(level) {
            snapshot = Some((spins.clone(), mismatches == 0));
        }
        hits += (mismatches == 0) as usize;
        let left = level < cut;
        match table.entry(k).class() {
            OperatorClass::Transverse if left => split.k_left += 1,
            OperatorClass::Transverse => split.k_right += 1,
            OperatorClass::Problem if left => split.l_left += 1,
            OperatorClass::Problem => split.l_right += 1,
        }
        if let (Slot::Flip(_), OperatorKind::Transverse { site }) = (slot, table.entry(k)) {
            let i = site as usize;
            sums[i] += (level + 1 - since[i]) as i64 * i64::from(spins[i]);
            since[i] = level + 1;
            let was_ok = spins[i] == answer[i];
            spins[i] = -spins[i];
            if was_ok {
                mismatches += 1;
            } else {
                mismatches -= 1;
            }
        }
        level += 1;
    }

    let (p_ans, magnetization) = if n == 0 {
        let ok = spins.iter().zip(answer).all(|(a, b)| a == b);
        (f64::from(ok as u8), spins.iter().map(|&s| f64::from(s)).collect())
    } else if let Some((snap, ok)) = snapshot {
        (f64::from(ok as u8), snap.iter().map(|&s| f64::from(s)).collect())
    } else {
        for i in 0..n_sites {
            sums[i] += (n - since[i]) as i64 * i64::from(spins[i]);
        }
        (
            hits as f64 / n as f64,
            sums.iter().map(|&s| s as f64 / n as f64).collect(),
        )
    };
    debug_assert_eq!(split.k() + split.l(), n as u64);
    ConfigurationSample {
        n_ops: n as u64,
        split,
        p_ans,
        magnetization,
    }
}

/// Operator counts left and right of a binomial cut.
pub fn measure_chi_f<R: Rng + ?Sized>(
    state: &SseState,
    table: &OperatorTable,
    rng: &mut R,
) -> SplitCounts {
    let answer = vec![1i8; state.n_sites()];
    sample_configuration(state, table, &answer, LevelMode::AllLevels, rng).split
}

/// Overlap of two independent replicas at the same `λ` of the same instance.
pub fn measure_q<R: Rng + ?Sized>(
    first: (&SseState, &OperatorTable),
    second: (&SseState, &OperatorTable),
    mode: LevelMode,
    rng: &mut R,
) -> Result<f64> {
    let ((s1, t1), (s2, t2)) = (first, second);
    if t1.lambda() != t2.lambda() {
        return Err(Error::ReplicaMismatch(format!(
            "lambda {} vs {}",
            t1.lambda(),
            t2.lambda()
        )));
    }
    if t1.entries() != t2.entries() || s1.n_sites() != s2.n_sites() {
        return Err(Error::ReplicaMismatch("replicas belong to different instances".into()));
    }
    let ones = vec![1i8; s1.n_sites()];
    let a = sample_configuration(s1, t1, &ones, mode, rng).magnetization;
    let b = sample_configuration(s2, t2, &ones, mode, rng).magnetization;
    Ok(overlap(&a, &b))
}

pub fn overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Fraction of propagated states equal to the answer.
pub fn measure_p_ans<R: Rng + ?Sized>(
    state: &SseState,
    table: &OperatorTable,
    answer: &[i8],
    mode: LevelMode,
    rng: &mut R,
) -> f64 {
    sample_configuration(state, table, answer, mode, rng).p_ans
}

/// Energy contribution of a configuration: `C(λ) − n/β`.
pub fn measure_energy(state: &SseState, table: &OperatorTable) -> f64 {
    table.constant() - state.n_ops() as f64 / state.beta()
}

/// Finite-temperature fidelity susceptibility from split-count moments.
pub fn chi_f_from_moments(m: &Sums, lambda: f64) -> f64 {
    let c = m.count as f64;
    let mean = |x: f64| x / c;
    let cov = |xy: f64, x: f64, y: f64| mean(xy) - mean(x) * mean(y);
    let one = 1.0 - lambda;
    cov(m.kk, m.k_left, m.k_right) / (2.0 * lambda * lambda)
        + cov(m.ll, m.l_left, m.l_right) / (2.0 * one * one)
        - cov(m.kl, m.k_left, m.l_right) / (2.0 * lambda * one)
        - cov(m.lk, m.l_left, m.k_right) / (2.0 * lambda * one)
}

/// Raw sums over configurations (and over replica pairs for `q`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sums {
    pub count: u64,
    pub n: f64,
    pub k_left: f64,
    pub k_right: f64,
    pub l_left: f64,
    pub l_right: f64,
    pub kk: f64,
    pub ll: f64,
    pub kl: f64,
    pub lk: f64,
    pub p_ans: f64,
    pub q_count: u64,
    pub q: f64,
}

impl Sums {
    pub fn add_sample(&mut self, s: &ConfigurationSample) {
        let sp = s.split;
        let (kl, kr, ll, lr) = (
            sp.k_left as f64,
            sp.k_right as f64,
            sp.l_left as f64,
            sp.l_right as f64,
        );
        self.count += 1;
        self.n += s.n_ops as f64;
        self.k_left += kl;
        self.k_right += kr;
        self.l_left += ll;
        self.l_right += lr;
        self.kk += kl * kr;
        self.ll += ll * lr;
        self.kl += kl * lr;
        self.lk += ll * kr;
        self.p_ans += s.p_ans;
    }

    pub fn add_q(&mut self, q: f64) {
        self.q_count += 1;
        self.q += q;
    }

    pub fn merge(&mut self, o: &Sums) {
        self.count += o.count;
        self.n += o.n;
        self.k_left += o.k_left;
        self.k_right += o.k_right;
        self.l_left += o.l_left;
        self.l_right += o.l_right;
        self.kk += o.kk;
        self.ll += o.ll;
        self.kl += o.kl;
        self.lk += o.lk;
        self.p_ans += o.p_ans;
        self.q_count += o.q_count;
        self.q += o.q;
    }

    fn minus(&self, o: &Sums) -> Sums {
        Sums {
            count: self.count - o.count,
            n: self.n - o.n,
            k_left: self.k_left - o.k_left,
            k_right: self.k_right - o.k_right,
            l_left: self.l_left - o.l_left,
            l_right: self.l_right - o.l_right,
            kk: self.kk - o.kk,
            ll: self.ll - o.ll,
            kl: self.kl - o.kl,
            lk: self.lk - o.lk,
            p_ans: self.p_ans - o.p_ans,
            q_count: self.q_count - o.q_count,
            q: self.q - o.q,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Measurement blocks at one `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaAccumulator {
    pub lambda: f64,
    pub constant: f64,
    pub beta: f64,
    pub rounds_per_block: u64,
    pub blocks: Vec<Sums>,
    pub current: Sums,
    current_rounds: u64,
}

impl LambdaAccumulator {
    pub fn new(lambda: f64, constant: f64, beta: f64, rounds_per_block: u64) -> Self {
        LambdaAccumulator {
            lambda,
            constant,
            beta,
            rounds_per_block: rounds_per_block.max(1),
            blocks: Vec::new(),
            current: Sums::default(),
            current_rounds: 0,
        }
    }

    /// Records one measurement round: any number of configurations plus an
    /// optional replica overlap.
    pub fn record(&mut self, samples: &[&ConfigurationSample], q: Option<f64>) {
        for s in samples {
            self.current.add_sample(s);
        }
        if let Some(q) = q {
            self.current.add_q(q);
        }
        self.current_rounds += 1;
        if self.current_rounds == self.rounds_per_block {
            self.blocks.push(std::mem::take(&mut self.current));
            self.current_rounds = 0;
        }
    }

    /// Appends the blocks of another accumulator for the same point.
    pub fn merge(&mut self, other: &LambdaAccumulator) -> Result<()> {
        if other.lambda != self.lambda || other.beta != self.beta {
            return Err(Error::ReplicaMismatch(
                "cannot merge accumulators for different (lambda, beta)".into(),
            ));
        }
        self.blocks.extend(other.blocks.iter().copied());
        if other.current.count > 0 || other.current.q_count > 0 {
            self.blocks.push(other.current);
        }
        Ok(())
    }

    fn all_blocks(&self) -> Vec<Sums> {
        let mut b = self.blocks.clone();
        if self.current.count > 0 || self.current.q_count > 0 {
            b.push(self.current);
        }
        b
    }

    pub fn totals(&self) -> Sums {
        let mut t = Sums::default();
        for b in self.all_blocks() {
            t.merge(&b);
        }
        t
    }

    pub fn samples(&self) -> u64 {
        self.totals().count
    }

    /// Delete-one-block jackknife of `f`; `None` if the total has no
    /// samples.
    pub fn jackknife(&self, f: impl Fn(&Sums) -> Option<f64>) -> Option<Estimate> {
        let blocks = self.all_blocks();
        let total = self.totals();
        let value = f(&total)?;
        let partial: Vec<f64> = blocks
            .iter()
            .filter_map(|b| f(&total.minus(b)))
            .collect();
        let error = if partial.len() < 2 {
            f64::NAN
        } else {
            let nb = partial.len() as f64;
            let mean = partial.iter().sum::<f64>() / nb;
            ((nb - 1.0) / nb * partial.iter().map(|x| (x - mean).powi(2)).sum::<f64>()).sqrt()
        };
        Some(Estimate { value, error })
    }

    pub fn energy(&self) -> Option<Estimate> {
        let (c, beta) = (self.constant, self.beta);
        self.jackknife(|s| (s.count > 0).then(|| c - s.n / s.count as f64 / beta))
    }

    pub fn n_mean(&self) -> Option<Estimate> {
        self.jackknife(|s| (s.count > 0).then(|| s.n / s.count as f64))
    }

    pub fn p_ans(&self) -> Option<Estimate> {
        self.jackknife(|s| (s.count > 0).then(|| s.p_ans / s.count as f64))
    }

    pub fn q(&self) -> Option<Estimate> {
        self.jackknife(|s| (s.q_count > 0).then(|| s.q / s.q_count as f64))
    }

    pub fn chi_f(&self) -> Option<Estimate> {
        let lambda = self.lambda;
        if lambda <= 0.0 || lambda >= 1.0 {
            return None;
        }
        self.jackknife(|s| (s.count > 0).then(|| chi_f_from_moments(s, lambda)))
    }
}

/// `S_ans = −log2 p`. A zero estimate from `samples` configurations is
/// reported as the lower bound `log2(samples)` with `bounded = true`.
pub fn answer_entropy(p_ans: f64, samples: u64) -> (f64, bool) {
    if p_ans > 0.0 {
        (-p_ans.log2(), false)
    } else {
        ((samples.max(1) as f64).log2(), true)
    }
}

/// One row of the per-run result table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
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
}

/// Column order of [`ResultRow`] files.
pub const RESULT_COLUMNS: [&str; 12] = [
    "instance_id",
    "lambda",
    "q",
    "q_err",
    "chiF",
    "chiF_err",
    "p_ans",
    "p_ans_err",
    "energy",
    "energy_err",
    "n_mean",
    "samples",
];

/// Per-instance accumulators over the λ grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub instance_id: String,
    pub n_sites: usize,
    pub points: Vec<LambdaAccumulator>,
}

impl MeasurementRecord {
    pub fn rows(&self) -> Vec<ResultRow> {
        let nan = Estimate {
            value: f64::NAN,
            error: f64::NAN,
        };
        self.points
            .iter()
            .map(|p| {
                let q = p.q().unwrap_or(nan);
                let chi = p.chi_f().unwrap_or(nan);
                let pa = p.p_ans().unwrap_or(nan);
                let e = p.energy().unwrap_or(nan);
                let nm = p.n_mean().unwrap_or(nan);
                ResultRow {
                    instance_id: self.instance_id.clone(),
                    lambda: p.lambda,
                    q: q.value,
                    q_err: q.error,
                    chi_f: chi.value,
                    chi_f_err: chi.error,
                    p_ans: pa.value,
                    p_ans_err: pa.error,
                    energy: e.value,
                    energy_err: e.error,
                    n_mean: nm.value,
                    samples: p.samples(),
                }
            })
            .collect()
    }

    pub fn merge(&mut self, other: &MeasurementRecord) -> Result<()> {
        if other.points.len() != self.points.len() {
            return Err(Error::ReplicaMismatch("records have different grids".into()));
        }
        for (a, b) in self.points.iter_mut().zip(&other.points) {
            a.merge(b)?;
        }
        Ok(())
    }
}

/// Writes rows as CSV with a header line.
pub fn write_rows<W: std::io::Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a result table, checking the header against [`RESULT_COLUMNS`].
pub fn parse_rows(bytes: &[u8]) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    if header.iter().ne(RESULT_COLUMNS.iter().copied()) {
        return Err(Error::InvalidRecord(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: ResultRow = rec?;
        if !(0.0..=1.0).contains(&row.lambda) {
            return Err(Error::InvalidRecord(format!("lambda {} outside [0, 1]", row.lambda)));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::hamiltonian::{build_operator_table, build_problem};
    use crate::rng::stream;

    fn sample(kl: u64, kr: u64, ll: u64, lr: u64) -> ConfigurationSample {
        ConfigurationSample {
            n_ops: kl + kr + ll + lr,
            split: SplitCounts {
                k_left: kl,
                k_right: kr,
                l_left: ll,
                l_right: lr,
            },
            p_ans: 0.5,
            magnetization: vec![],
        }
    }

    #[test]
    fn constant_strings_have_zero_chi_f() {
        let mut acc = LambdaAccumulator::new(0.4, 1.0, 2.0, 4);
        let s = sample(3, 2, 5, 7);
        for _ in 0..40 {
            acc.record(&[&s], Some(0.3));
        }
        let chi = acc.chi_f().unwrap();
        assert!(chi.value.abs() < 1e-9);
        assert!(chi.error.abs() < 1e-9);
        assert!((acc.q().unwrap().value - 0.3).abs() < 1e-12);
        assert!((acc.energy().unwrap().value - (1.0 - 17.0 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn chi_f_undefined_at_endpoints() {
        let mut acc = LambdaAccumulator::new(0.0, 1.0, 2.0, 4);
        acc.record(&[&sample(1, 1, 1, 1)], None);
        assert!(acc.chi_f().is_none());
    }

    #[test]
    fn split_counts_are_consistent() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let h = build_problem(&g, 2.0).unwrap();
        let t = build_operator_table(&h, 0.5).unwrap();
        let mut s = crate::sse::SseState::random(4, 6.0, stream(1, &[])).unwrap();
        let mut rng = stream(2, &[]);
        for i in 0..300 {
            s.mc_sweep(&t, i < 100);
            let c = sample_configuration(&s, &t, &[1, -1, 1, -1], LevelMode::AllLevels, &mut rng);
            assert_eq!(c.split.k() + c.split.l(), s.n_ops() as u64);
            assert_eq!(c.split.k(), s.n_transverse() as u64);
            assert!((0.0..=1.0).contains(&c.p_ans));
            assert!(c.magnetization.iter().all(|m| m.abs() <= 1.0));
            let r = sample_configuration(&s, &t, &[1, -1, 1, -1], LevelMode::RandomLevel, &mut rng);
            assert!(r.p_ans == 0.0 || r.p_ans == 1.0);
            assert!(r.magnetization.iter().all(|m| m.abs() == 1.0));
        }
    }

    #[test]
    fn q_rejects_mismatched_replicas() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let h = build_problem(&g, 2.0).unwrap();
        let a = build_operator_table(&h, 0.3).unwrap();
        let b = build_operator_table(&h, 0.4).unwrap();
        let s1 = crate::sse::SseState::random(2, 2.0, stream(1, &[])).unwrap();
        let s2 = crate::sse::SseState::random(2, 2.0, stream(2, &[])).unwrap();
        let mut rng = stream(3, &[]);
        assert!(measure_q((&s1, &a), (&s2, &b), LevelMode::AllLevels, &mut rng).is_err());
        let q = measure_q((&s1, &a), (&s2, &a), LevelMode::AllLevels, &mut rng).unwrap();
        assert!((-1.0..=1.0).contains(&q));
    }

    #[test]
    fn merge_is_order_independent() {
        let mut rng = stream(5, &[]);
        let mut make = |lambda| {
            let mut acc = LambdaAccumulator::new(lambda, 0.0, 1.0, 3);
            for _ in 0..20 {
                let s = sample(
                    rng.random_range(0..9),
                    rng.random_range(0..9),
                    rng.random_range(0..9),
                    rng.random_range(0..9),
                );
                acc.record(&[&s], Some(rng.random()));
            }
            acc
        };
        let (a, b, c) = (make(0.5), make(0.5), make(0.5));
        let mut x = a.clone();
        x.merge(&b).unwrap();
        x.merge(&c).unwrap();
        let mut y = c.clone();
        y.merge(&a).unwrap();
        y.merge(&b).unwrap();
        for (u, v) in [
            (x.chi_f().unwrap(), y.chi_f().unwrap()),
            (x.q().unwrap(), y.q().unwrap()),
            (x.energy().unwrap(), y.energy().unwrap()),
        ] {
            assert!((u.value - v.value).abs() < 1e-9 * (1.0 + u.value.abs()));
            assert!((u.error - v.error).abs() < 1e-9 * (1.0 + u.error.abs()));
        }
        let other = make(0.6);
        assert!(x.merge(&other).is_err());
    }

    #[test]
    fn answer_entropy_bounds() {
        assert_eq!(answer_entropy(1.0, 10), (0.0, false));
        assert_eq!(answer_entropy(0.25, 10), (2.0, false));
        assert_eq!(answer_entropy(0.0, 1024), (10.0, true));
    }

    #[test]
    fn csv_roundtrip_and_header_check() {
        let row = ResultRow {
            instance_id: "x".into(),
            lambda: 0.5,
            q: 0.1,
            q_err: 0.01,
            chi_f: 2.0,
            chi_f_err: 0.2,
            p_ans: 0.3,
            p_ans_err: 0.03,
            energy: -1.0,
            energy_err: 0.1,
            n_mean: 12.0,
            samples: 100,
        };
        let mut buf = Vec::new();
        write_rows(&mut buf, std::slice::from_ref(&row)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&RESULT_COLUMNS.join(",")));
        assert_eq!(parse_rows(&buf).unwrap(), vec![row]);
        assert!(parse_rows(b"a,b\n1,2\n").is_err());
    }
}
