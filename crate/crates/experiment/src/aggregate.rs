//! Sample averages over instances with bootstrap errors.
//!
//! Errors are the standard deviation of `B` bootstrap replicates in which
//! instances are redrawn with replacement. Every replicate of a curve uses
//! the same redraw at all grid points, so derived quantities (finite
//! differences, peak positions) get consistent errors.

use std::collections::BTreeMap;

use qafid_core::estimators::answer_entropy;
use qafid_core::rng::stream;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};
use crate::store::InstanceResult;

/// Relative tolerance when checking that instances share a λ grid.
const GRID_TOL: f64 = 1e-9;
/// Prominence, in standard errors, for a local maximum of χ̄_F/N to count
/// as a separate peak.
pub const PEAK_PROMINENCE: f64 = 2.0;

fn check_bootstrap(b: usize, samples: usize) -> Result<()> {
    if b < 2 {
        return Err(ExperimentError::Config(format!(
            "bootstrap needs at least 2 resamples, got {b}"
        )));
    }
    if samples < 2 {
        return Err(ExperimentError::InsufficientSamples {
            need: 2,
            have: samples,
        });
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `len − 1`).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    // shifted by the first value so identical inputs give exactly zero
    let d: Vec<f64> = xs.iter().map(|x| x - xs[0]).collect();
    let m = mean(&d);
    (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Index sets of `b` bootstrap redraws of `n` items.
pub fn resamples(n: usize, b: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = stream(seed, &[n as u64, b as u64]);
    (0..b)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect()
}

/// Bootstrap error of the mean of `values`.
pub fn bootstrap_error(values: &[f64], b: usize, seed: u64) -> Result<f64> {
    check_bootstrap(b, values.len())?;
    let reps: Vec<f64> = resamples(values.len(), b, seed)
        .iter()
        .map(|idx| idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64)
        .collect();
    Ok(std_dev(&reps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanPoint {
    pub lambda: f64,
    pub mean: f64,
    pub error: f64,
}

/// Mean curve of one observable at one size.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub lambdas: Vec<f64>,
    /// `values[instance][point]`
    pub values: Vec<Vec<f64>>,
}

impl Curve {
    pub fn mean_of(&self, idx: &[usize]) -> Vec<f64> {
        (0..self.lambdas.len())
            .map(|p| idx.iter().map(|&i| self.values[i][p]).sum::<f64>() / idx.len() as f64)
            .collect()
    }

    pub fn means(&self) -> Vec<f64> {
        let all: Vec<usize> = (0..self.values.len()).collect();
        self.mean_of(&all)
    }

    /// Point means with bootstrap errors.
    pub fn summarize(&self, draws: &[Vec<usize>]) -> Vec<MeanPoint> {
        let m = self.means();
        let reps: Vec<Vec<f64>> = draws.iter().map(|d| self.mean_of(d)).collect();
        (0..self.lambdas.len())
            .map(|p| MeanPoint {
                lambda: self.lambdas[p],
                mean: m[p],
                error: std_dev(&reps.iter().map(|r| r[p]).collect::<Vec<_>>()),
            })
            .collect()
    }

    /// Centered differences of the mean curve at interior points, with
    /// bootstrap errors. Requires a uniform grid.
    pub fn derivative(&self, draws: &[Vec<usize>]) -> Result<(f64, Vec<MeanPoint>)> {
        let h = uniform_spacing(&self.lambdas)?;
        let diff = |y: &[f64]| -> Vec<f64> {
            (1..y.len().saturating_sub(1))
                .map(|p| (y[p + 1] - y[p - 1]) / (2.0 * h))
                .collect()
        };
        let d = diff(&self.means());
        let reps: Vec<Vec<f64>> = draws.iter().map(|idx| diff(&self.mean_of(idx))).collect();
        let points = d
            .iter()
            .enumerate()
            .map(|(k, &v)| MeanPoint {
                lambda: self.lambdas[k + 1],
                mean: v,
                error: std_dev(&reps.iter().map(|r| r[k]).collect::<Vec<_>>()),
            })
            .collect();
        Ok((h, points))
    }
}

/// Grid spacing, or an error if the grid is not uniform.
pub fn uniform_spacing(lambdas: &[f64]) -> Result<f64> {
    if lambdas.len() < 3 {
        return Err(ExperimentError::Config(
            "finite differences need at least 3 grid points".into(),
        ));
    }
    let h = (lambdas[lambdas.len() - 1] - lambdas[0]) / (lambdas.len() - 1) as f64;
    let uniform = lambdas
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= GRID_TOL * h.abs().max(1.0));
    if !uniform || h <= 0.0 {
        return Err(ExperimentError::Config("λ grid is not uniform and increasing".into()));
    }
    Ok(h)
}

/// Location and height of the maximum of a mean curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub lambda: f64,
    pub lambda_err: f64,
    pub value: f64,
    pub value_err: f64,
    /// Local maxima that stand out from the noise (see [`count_peaks`]).
    pub peaks: usize,
}

/// Vertex of the parabola through the grid maximum and its neighbours;
/// the grid point itself at the edges.
pub fn refine_max(lambdas: &[f64], y: &[f64]) -> (f64, f64) {
    let k = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("non-empty curve");
    if k == 0 || k + 1 == y.len() {
        return (lambdas[k], y[k]);
    }
    let (x0, x1, x2) = (lambdas[k - 1], lambdas[k], lambdas[k + 1]);
    let (y0, y1, y2) = (y[k - 1], y[k], y[k + 1]);
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let a = (d1 - d0) / (x2 - x0);
    if a >= 0.0 {
        return (x1, y1);
    }
    let b = d0 - a * (x0 + x1);
    let c = y0 - a * x0 * x0 - b * x0;
    let x = (-b / (2.0 * a)).clamp(x0, x2);
    (x, a * x * x + b * x + c)
}

/// Number of local maxima whose prominence exceeds `sigmas` times the
/// larger error of the peak and its deepest separating point.
pub fn count_peaks(y: &[f64], err: &[f64], sigmas: f64) -> usize {
    let n = y.len();
    let mut count = 0;
    for k in 0..n {
        let left_ok = k == 0 || y[k] > y[k - 1];
        let right_ok = k + 1 == n || y[k] >= y[k + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        // walk outwards until a higher point; the minimum on the way bounds
        // the prominence on that side
        let side = |range: &mut dyn Iterator<Item = usize>| -> Option<usize> {
            let mut low: Option<usize> = None;
            for j in range {
                if y[j] > y[k] {
                    return low;
                }
                if low.is_none_or(|l| y[j] < y[l]) {
                    low = Some(j);
                }
            }
            None
        };
        let left = side(&mut (0..k).rev());
        let right = side(&mut (k + 1..n));
        let base = match (left, right) {
            (Some(a), Some(b)) => Some(if y[a] > y[b] { a } else { b }),
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        };
        match base {
            None => count += 1,
            Some(j) => {
                if y[k] - y[j] > sigmas * err[k].max(err[j]) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Aggregated curves of one system size.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeSummary {
    pub n: usize,
    pub samples: usize,
    pub q: Vec<MeanPoint>,
    pub chi_f_per_n: Vec<MeanPoint>,
    pub p_ans: Vec<MeanPoint>,
    pub s_ans_per_n: Vec<MeanPoint>,
    /// True at points where some instance never hit the answer and its
    /// entropy entered as a lower bound.
    pub s_ans_bounded: Vec<bool>,
    pub energy: Vec<MeanPoint>,
    pub spacing: f64,
    pub dq: Vec<MeanPoint>,
    pub peak: Peak,
}

/// Curves of one size extracted from stored results.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeCurves {
    pub n: usize,
    pub ids: Vec<String>,
    pub q: Curve,
    pub chi_f_per_n: Curve,
    pub p_ans: Curve,
    pub s_ans_per_n: Curve,
    pub s_ans_bounded: Vec<bool>,
    pub energy: Curve,
}

impl SizeCurves {
    pub fn from_results(n: usize, results: &[&InstanceResult]) -> Result<Self> {
        let first = results
            .first()
            .ok_or(ExperimentError::InsufficientSamples { need: 2, have: 0 })?;
        let lambdas: Vec<f64> = first.rows.iter().map(|r| r.lambda).collect();
        for r in results {
            let same = r.rows.len() == lambdas.len()
                && r.rows
                    .iter()
                    .zip(&lambdas)
                    .all(|(row, l)| (row.lambda - l).abs() <= GRID_TOL);
            if !same {
                return Err(ExperimentError::Config(format!(
                    "instance {} uses a different λ grid",
                    r.id
                )));
            }
        }
        let curve = |f: &dyn Fn(&qafid_core::estimators::ResultRow) -> f64| Curve {
            lambdas: lambdas.clone(),
            values: results
                .iter()
                .map(|r| r.rows.iter().map(f).collect())
                .collect(),
        };
        let nf = n as f64;
        let mut bounded = vec![false; lambdas.len()];
        for r in results {
            for (p, row) in r.rows.iter().enumerate() {
                bounded[p] |= answer_entropy(row.p_ans, row.samples).1;
            }
        }
        Ok(SizeCurves {
            n,
            ids: results.iter().map(|r| r.id.clone()).collect(),
            q: curve(&|r| r.q),
            chi_f_per_n: curve(&|r| r.chi_f / nf),
            p_ans: curve(&|r| r.p_ans),
            s_ans_per_n: curve(&|r| answer_entropy(r.p_ans, r.samples).0 / nf),
            s_ans_bounded: bounded,
            energy: curve(&|r| r.energy),
        })
    }

    pub fn summarize(&self, b: usize, seed: u64) -> Result<SizeSummary> {
        let count = self.ids.len();
        check_bootstrap(b, count)?;
        let draws = resamples(count, b, seed ^ self.n as u64);
        let chi = self.chi_f_per_n.summarize(&draws);
        let (lambda, value) = refine_max(&self.chi_f_per_n.lambdas, &self.chi_f_per_n.means());
        let peak_reps: Vec<(f64, f64)> = draws
            .iter()
            .map(|d| refine_max(&self.chi_f_per_n.lambdas, &self.chi_f_per_n.mean_of(d)))
            .collect();
        let chi_y: Vec<f64> = chi.iter().map(|p| p.mean).collect();
        let chi_e: Vec<f64> = chi.iter().map(|p| p.error).collect();
        let peak = Peak {
            lambda,
            lambda_err: std_dev(&peak_reps.iter().map(|p| p.0).collect::<Vec<_>>()),
            value,
            value_err: std_dev(&peak_reps.iter().map(|p| p.1).collect::<Vec<_>>()),
            peaks: count_peaks(&chi_y, &chi_e, PEAK_PROMINENCE),
        };
        let (spacing, dq) = self.q.derivative(&draws)?;
        Ok(SizeSummary {
            n: self.n,
            samples: count,
            q: self.q.summarize(&draws),
            chi_f_per_n: chi,
            p_ans: self.p_ans.summarize(&draws),
            s_ans_per_n: self.s_ans_per_n.summarize(&draws),
            s_ans_bounded: self.s_ans_bounded.clone(),
            energy: self.energy.summarize(&draws),
            spacing,
            dq,
            peak,
        })
    }
}

/// Groups results by size.
pub fn by_size(results: &[InstanceResult]) -> BTreeMap<usize, Vec<&InstanceResult>> {
    let mut map: BTreeMap<usize, Vec<&InstanceResult>> = BTreeMap::new();
    for r in results {
        map.entry(r.n).or_default().push(r);
    }
    map
}

/// Curves and summaries for every size present.
pub fn aggregate(results: &[InstanceResult], b: usize, seed: u64) -> Result<Vec<(SizeCurves, SizeSummary)>> {
    by_size(results)
        .into_iter()
        .map(|(n, rs)| {
            let curves = SizeCurves::from_results(n, &rs)?;
            let summary = curves.summarize(b, seed)?;
            Ok((curves, summary))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_samples_have_zero_error() {
        assert_eq!(bootstrap_error(&[0.7; 50], 200, 1).unwrap(), 0.0);
    }

    #[test]
    fn rejects_single_resample_and_single_sample() {
        assert!(matches!(
            bootstrap_error(&[1.0, 2.0], 1, 0),
            Err(ExperimentError::Config(_))
        ));
        assert!(matches!(
            bootstrap_error(&[1.0], 100, 0),
            Err(ExperimentError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn gaussian_bootstrap_matches_standard_error() {
        let sigma = 1.5;
        let n = 400;
        let normal = Normal::new(3.0, sigma).unwrap();
        let mut rng = stream(42, &[]);
        let xs: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let err = bootstrap_error(&xs, 1000, 9).unwrap();
        let expected = sigma / (n as f64).sqrt();
        assert!((err / expected - 1.0).abs() < 0.15, "{err} vs {expected}");
    }

    #[test]
    fn parabola_vertex() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - (x - 0.33).powi(2)).collect();
        let (x, y) = refine_max(&xs, &ys);
        assert!((x - 0.33).abs() < 1e-12 && (y - 2.0).abs() < 1e-12);
        let (x, _) = refine_max(&xs, &xs);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn peak_counting_ignores_noise() {
        let y = [0.0, 1.0, 2.0, 1.9, 2.05, 1.0, 0.5, 0.8, 0.2];
        assert_eq!(count_peaks(&y, &[0.1; 9], 2.0), 2);
        assert_eq!(count_peaks(&y, &[0.2; 9], 2.0), 1);
        assert_eq!(count_peaks(&[1.0, 1.0, 1.0], &[0.0; 3], 2.0), 1);
    }

    #[test]
    fn derivative_of_linear_curve() {
        let lambdas = vec![0.1, 0.2, 0.3, 0.4];
        let c = Curve {
            lambdas: lambdas.clone(),
            values: vec![vec![1.0, 0.8, 0.6, 0.4], vec![2.0, 1.8, 1.6, 1.4]],
        };
        let draws = resamples(2, 10, 3);
        let (h, d) = c.derivative(&draws).unwrap();
        assert!((h - 0.1).abs() < 1e-12);
        assert_eq!(d.len(), 2);
        for p in d {
            assert!((p.mean + 2.0).abs() < 1e-9 && p.error < 1e-9);
        }
        assert!(uniform_spacing(&[0.1, 0.2, 0.4]).is_err());
    }
}
