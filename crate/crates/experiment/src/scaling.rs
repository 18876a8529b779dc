//! Solver-cost scaling: median DPLR step counts against N, fitted by a
//! stretched exponential and by a power law.
//!
//! With `y = ln(median steps)` the two models are
//!
//! * stretched: `y = a·N^b + c`
//! * logarithmic: `y = c + d·ln N` (polynomial cost)
//!
//! The stretched model is linear in `(a, c)` for fixed `b`, so it is fitted
//! by a one-dimensional search over `b` around an exact linear solve.
//! Parameter errors come from refitting bootstrap redraws of the step
//! samples at every size.

use qafid_core::graph::generate_er_graph;
use qafid_core::instance::{generate_unique_instance, GenerationStats};
use qafid_core::rng::{derive_seed, stream};
use qafid_core::solver::{dplr, BranchRule, SolveOptions};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::std_dev;
use crate::error::{ExperimentError, Result};

pub const MIN_SIZES: usize = 4;
/// Sample count per size below which medians are too noisy for a fit
/// worth reporting; runs below it only warn.
pub const RECOMMENDED_SAMPLES: usize = 1000;

const B_MIN: f64 = 1e-3;
const B_MAX: f64 = 3.0;
const B_GRID: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// Plain ER graphs.
    Er,
    /// ER graphs made to have a unique maximum independent set.
    Unique,
}

impl std::fmt::Display for Ensemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ensemble::Er => "er",
            Ensemble::Unique => "unique",
        })
    }
}

impl std::str::FromStr for Ensemble {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "er" => Ok(Ensemble::Er),
            "unique" => Ok(Ensemble::Unique),
            other => Err(ExperimentError::Config(format!(
                "unknown ensemble '{other}' (expected er or unique)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepOptions {
    pub ensemble: Ensemble,
    pub degree: f64,
    pub seed: u64,
    pub branch: BranchRule,
    pub step_budget: u64,
    pub solution_budget: usize,
    pub max_attempts: usize,
}

/// DPLR step counts of `samples` graphs of size `n`, in sample order.
///
/// Graph `s` depends only on `(seed, n, s)`; with random branching the
/// branching stream is derived from the same labels, so the result does not
/// depend on the thread count.
pub fn collect_steps(n: usize, samples: usize, o: &StepOptions) -> Result<Vec<u64>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let graph = match o.ensemble {
                Ensemble::Er => generate_er_graph(n, o.degree, &mut stream(o.seed, &[n as u64, s]))?,
                Ensemble::Unique => {
                    let mut stats = GenerationStats::default();
                    generate_unique_instance(
                        n,
                        o.degree,
                        o.seed,
                        s,
                        o.solution_budget,
                        o.max_attempts,
                        &mut stats,
                    )?
                    .graph
                }
            };
            let branch = match o.branch {
                BranchRule::Random { seed } => BranchRule::Random {
                    seed: derive_seed(seed ^ o.seed, &[n as u64, s]),
                },
                rule => rule,
            };
            let opts = SolveOptions {
                branch,
                step_budget: o.step_budget,
            };
            Ok(dplr(&graph, &opts)?.steps)
        })
        .collect()
}

pub fn median(xs: &[u64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] as f64 + v[m] as f64) / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    Stretched,
    Logarithmic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<FitParam>,
    pub rss: f64,
    /// Bootstrap replicates that failed to fit and were left out.
    pub failed_replicates: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Least squares line `y = slope·x + intercept`; returns `(slope, intercept, rss)`.
fn line_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let scale = x.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if sxx <= 1e-14 * scale || !sxx.is_finite() {
        return Err(ExperimentError::FitDiverged(format!(
            "singular normal equations (spread of regressor {sxx:e})"
        )));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    Ok((slope, intercept, rss))
}

fn check_points(ns: &[f64], ys: &[f64]) -> Result<()> {
    if ns.len() != ys.len() || ns.len() < 3 {
        return Err(ExperimentError::InsufficientSamples {
            need: 3,
            have: ns.len().min(ys.len()),
        });
    }
    if ns.iter().chain(ys).any(|v| !v.is_finite()) || ns.iter().any(|&n| n <= 0.0) {
        return Err(ExperimentError::FitDiverged("non-finite or non-positive data".into()));
    }
    Ok(())
}

/// Point estimate `(a, b, c, rss)` of `y = a·N^b + c`.
pub fn fit_stretched(ns: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, f64)> {
    check_points(ns, ys)?;
    let rss_at = |b: f64| -> Result<(f64, f64, f64)> {
        let x: Vec<f64> = ns.iter().map(|n| n.powf(b)).collect();
        line_fit(&x, ys)
    };
    let step = (B_MAX - B_MIN) / B_GRID as f64;
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..=B_GRID {
        if let Ok((_, _, rss)) = rss_at(B_MIN + k as f64 * step) {
            if rss < best.0 {
                best = (rss, k);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(ExperimentError::FitDiverged("no exponent gives a solvable fit".into()));
    }
    // golden-section refinement inside the neighbouring grid cells
    let mut lo = B_MIN + best.1.saturating_sub(1) as f64 * step;
    let mut hi = (B_MIN + (best.1 + 1) as f64 * step).min(B_MAX);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let f = |b: f64| rss_at(b).map(|r| r.2).unwrap_or(f64::INFINITY);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let b = (lo + hi) / 2.0;
    if b <= B_MIN + step || b >= B_MAX - step {
        return Err(ExperimentError::FitDiverged(format!(
            "exponent b = {b:.4} ran to the search boundary [{B_MIN}, {B_MAX}]"
        )));
    }
    let (a, c, rss) = rss_at(b)?;
    Ok((a, b, c, rss))
}

/// Point estimate `(c, d, rss)` of `y = c + d·ln N`.
pub fn fit_logarithmic(ns: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    check_points(ns, ys)?;
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let (d, c, rss) = line_fit(&x, ys)?;
    Ok((c, d, rss))
}

/// Summary of one size's step counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub samples: usize,
    pub median: f64,
    pub median_err: f64,
    pub log_median: f64,
    pub log_median_err: f64,
    /// Diagnostic only; dominated by the long tail.
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub stretched: FitResult,
    pub logarithmic: FitResult,
}

impl ScalingReport {
    /// The stretched model fits better than the logarithmic one.
    pub fn stretched_preferred(&self) -> bool {
        self.stretched.rss < self.logarithmic.rss
    }
}

fn params_with_errors(names: &[&str], point: &[f64], reps: &[Vec<f64>]) -> Vec<FitParam> {
    names
        .iter()
        .enumerate()
        .map(|(k, name)| FitParam {
            name: name.to_string(),
            value: point[k],
            error: std_dev(&reps.iter().map(|r| r[k]).collect::<Vec<_>>()),
        })
        .collect()
}

/// Fits both models to `ln(median)` of `data = [(N, steps)]`, with errors
/// from `resamples` bootstrap redraws.
pub fn scaling_fit(data: &[(usize, Vec<u64>)], resamples: usize, seed: u64) -> Result<ScalingReport> {
    if data.len() < MIN_SIZES {
        return Err(ExperimentError::InsufficientSamples {
            need: MIN_SIZES,
            have: data.len(),
        });
    }
    if resamples < 2 {
        return Err(ExperimentError::Config(format!(
            "bootstrap needs at least 2 resamples, got {resamples}"
        )));
    }
    if let Some((_, s)) = data.iter().find(|(_, s)| s.len() < 2) {
        return Err(ExperimentError::InsufficientSamples { need: 2, have: s.len() });
    }
    if data.iter().any(|(_, s)| s.len() < RECOMMENDED_SAMPLES) {
        log::warn!("fewer than {RECOMMENDED_SAMPLES} samples at some size; medians will be noisy");
    }
    let ns: Vec<f64> = data.iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = data.iter().map(|(_, s)| median(s).ln()).collect();

    let mut rng = stream(seed, &[data.len() as u64]);
    let reps: Vec<Vec<f64>> = (0..resamples)
        .map(|_| {
            data.iter()
                .map(|(_, s)| {
                    let draw: Vec<u64> = (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).collect();
                    median(&draw)
                })
                .collect()
        })
        .collect();

    let points = data
        .iter()
        .enumerate()
        .map(|(k, (n, s))| {
            let meds: Vec<f64> = reps.iter().map(|r| r[k]).collect();
            let logs: Vec<f64> = meds.iter().map(|m| m.ln()).collect();
            ScalingPoint {
                n: *n,
                samples: s.len(),
                median: median(s),
                median_err: std_dev(&meds),
                log_median: ys[k],
                log_median_err: std_dev(&logs),
                mean: s.iter().map(|&v| v as f64).sum::<f64>() / s.len() as f64,
            }
        })
        .collect();

    let (a, b, c, rss_s) = fit_stretched(&ns, &ys)?;
    let (c0, d, rss_l) = fit_logarithmic(&ns, &ys)?;
    let mut stretched_reps = Vec::new();
    let mut log_reps = Vec::new();
    let mut failed = [0usize; 2];
    for r in &reps {
        let y: Vec<f64> = r.iter().map(|m| m.ln()).collect();
        match fit_stretched(&ns, &y) {
            Ok((a, b, c, _)) => stretched_reps.push(vec![a, b, c]),
            Err(_) => failed[0] += 1,
        }
        match fit_logarithmic(&ns, &y) {
            Ok((c, d, _)) => log_reps.push(vec![c, d]),
            Err(_) => failed[1] += 1,
        }
    }
    if failed[0] * 2 > resamples {
        return Err(ExperimentError::FitDiverged(format!(
            "{} of {resamples} bootstrap refits of the stretched model failed",
            failed[0]
        )));
    }
    Ok(ScalingReport {
        points,
        stretched: FitResult {
            model: FitModel::Stretched,
            params: params_with_errors(&["a", "b", "c"], &[a, b, c], &stretched_reps),
            rss: rss_s,
            failed_replicates: failed[0],
        },
        logarithmic: FitResult {
            model: FitModel::Logarithmic,
            params: params_with_errors(&["c", "d"], &[c0, d], &log_reps),
            rss: rss_l,
            failed_replicates: failed[1],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIZES: [f64; 6] = [20.0, 40.0, 60.0, 80.0, 100.0, 120.0];

    #[test]
    fn recovers_synthetic_stretched_exponent() {
        let ys: Vec<f64> = SIZES.iter().map(|n| 2.0 * n.sqrt() + 1.0).collect();
        let (a, b, c, rss) = fit_stretched(&SIZES, &ys).unwrap();
        assert!((b - 0.5).abs() < 0.02, "b = {b}");
        assert!((a - 2.0).abs() < 1e-3 && (c - 1.0).abs() < 1e-2, "a = {a}, c = {c}");
        assert!(rss < 1e-12);
        let (_, _, rss_log) = fit_logarithmic(&SIZES, &ys).unwrap();
        assert!(rss_log > rss);
    }

    #[test]
    fn recovers_power_law() {
        let ys: Vec<f64> = SIZES.iter().map(|n| 0.5 + 1.7 * n.ln()).collect();
        let (c, d, rss) = fit_logarithmic(&SIZES, &ys).unwrap();
        assert!((c - 0.5).abs() < 1e-9 && (d - 1.7).abs() < 1e-9 && rss < 1e-18);
    }

    #[test]
    fn degenerate_inputs_are_reported() {
        let same = [10.0; 5];
        assert!(matches!(
            fit_logarithmic(&same, &[1.0, 2.0, 3.0, 4.0, 5.0]),
            Err(ExperimentError::FitDiverged(_))
        ));
        assert!(fit_stretched(&same, &[1.0, 2.0, 3.0, 4.0, 5.0]).is_err());
        let data: Vec<(usize, Vec<u64>)> = vec![(10, vec![1, 2]), (20, vec![3, 4]), (30, vec![5, 6])];
        assert!(matches!(
            scaling_fit(&data, 10, 0),
            Err(ExperimentError::InsufficientSamples { need: 4, .. })
        ));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[5, 1, 3]), 3.0);
        assert_eq!(median(&[4, 1, 3, 2]), 2.5);
    }

    #[test]
    fn bootstrap_fit_on_noisy_synthetic_steps() {
        // steps scattered by a factor of up to 2 around exp(2·N^0.5 + 1)
        let mut rng = stream(3, &[]);
        let data: Vec<(usize, Vec<u64>)> = SIZES
            .iter()
            .map(|&n| {
                let centre = (2.0 * n.sqrt() + 1.0).exp();
                let steps = (0..401)
                    .map(|_| (centre * 2f64.powf(rng.random_range(-1.0..1.0))) as u64)
                    .collect();
                (n as usize, steps)
            })
            .collect();
        let report = scaling_fit(&data, 200, 1).unwrap();
        let b = report.stretched.param("b").unwrap();
        assert!((b.value - 0.5).abs() < 3.0 * b.error + 0.02, "{b:?}");
        assert!(b.error > 0.0);
        assert!(report.stretched_preferred());
    }

    #[test]
    fn step_collection_is_deterministic() {
        let o = StepOptions {
            ensemble: Ensemble::Er,
            degree: 3.0,
            seed: 5,
            branch: BranchRule::Random { seed: 0 },
            step_budget: 1_000_000,
            solution_budget: 100_000,
            max_attempts: 100,
        };
        let a = collect_steps(20, 16, &o).unwrap();
        let b = collect_steps(20, 16, &o).unwrap();
        assert_eq!(a, b);
        let u = collect_steps(12, 4, &StepOptions { ensemble: Ensemble::Unique, ..o }).unwrap();
        assert_eq!(u.len(), 4);
    }
}
