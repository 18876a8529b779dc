//! Plot-ready CSV tables.
//!
//! | file                 | content                                              |
//! |----------------------|------------------------------------------------------|
//! | `q_samples.csv`      | q(λ) of every instance                               |
//! | `q_mean.csv`         | q̄(λ) per size                                        |
//! | `dq.csv`             | dq̄/dλ per size by centered differences               |
//! | `chif_samples.csv`   | χ_F(λ) of every instance                             |
//! | `chif_mean.csv`      | χ̄_F/N per size                                      |
//! | `chif_peaks.csv`     | peak location and height of χ̄_F/N per size          |
//! | `answer_samples.csv` | F_ans² = ⟨P_ans⟩ of every instance                   |
//! | `answer_mean.csv`    | p̄_ans and S̄_ans/N per size                         |
//! | `energy_mean.csv`    | mean energy per size                                 |
//! | `scaling.csv`        | median DPLR steps per ensemble and size              |
//! | `scaling_fits.csv`   | fitted parameters of both models                     |

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::aggregate::{SizeCurves, SizeSummary};
use crate::error::Result;
use crate::scaling::{Ensemble, ScalingReport};

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SampleRow<'a> {
    n: usize,
    instance_id: &'a str,
    lambda: f64,
    value: f64,
}

#[derive(Serialize)]
struct MeanRow {
    n: usize,
    samples: usize,
    lambda: f64,
    mean: f64,
    error: f64,
}

#[derive(Serialize)]
struct DerivativeRow {
    n: usize,
    lambda: f64,
    spacing: f64,
    dq: f64,
    dq_err: f64,
}

#[derive(Serialize)]
struct PeakRow {
    n: usize,
    samples: usize,
    peak_lambda: f64,
    peak_lambda_err: f64,
    peak_value: f64,
    peak_value_err: f64,
    peaks: usize,
}

#[derive(Serialize)]
struct AnswerRow {
    n: usize,
    samples: usize,
    lambda: f64,
    p_ans: f64,
    p_ans_err: f64,
    s_ans_per_n: f64,
    s_ans_per_n_err: f64,
    s_ans_lower_bound: bool,
}

#[derive(Serialize)]
struct ScalingRow {
    ensemble: Ensemble,
    n: usize,
    samples: usize,
    median: f64,
    median_err: f64,
    log_median: f64,
    log_median_err: f64,
    mean: f64,
}

#[derive(Serialize)]
struct FitRow {
    ensemble: Ensemble,
    model: crate::scaling::FitModel,
    param: String,
    value: f64,
    error: f64,
    rss: f64,
}

fn sample_rows<'a>(curves: &'a [SizeCurves], pick: impl Fn(&'a SizeCurves) -> &'a crate::aggregate::Curve) -> Vec<SampleRow<'a>> {
    curves
        .iter()
        .flat_map(|c| {
            let curve = pick(c);
            c.ids.iter().zip(&curve.values).flat_map(move |(id, vals)| {
                curve.lambdas.iter().zip(vals).map(move |(&lambda, &value)| SampleRow {
                    n: c.n,
                    instance_id: id,
                    lambda,
                    value,
                })
            })
        })
        .collect()
}

fn mean_rows(summaries: &[SizeSummary], pick: impl Fn(&SizeSummary) -> &[crate::aggregate::MeanPoint]) -> Vec<MeanRow> {
    summaries
        .iter()
        .flat_map(|s| {
            pick(s).iter().map(move |p| MeanRow {
                n: s.n,
                samples: s.samples,
                lambda: p.lambda,
                mean: p.mean,
                error: p.error,
            })
        })
        .collect()
}

/// Writes the ensemble tables; returns the files written.
pub fn emit_ensemble(out: &Path, curves: &[SizeCurves], summaries: &[SizeSummary]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut put = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let p = out.join(name);
        f(&p)?;
        written.push(p);
        Ok(())
    };
    put("q_samples.csv", &|p| write_csv(p, &sample_rows(curves, |c| &c.q)))?;
    put("q_mean.csv", &|p| write_csv(p, &mean_rows(summaries, |s| &s.q)))?;
    put("dq.csv", &|p| {
        let rows: Vec<DerivativeRow> = summaries
            .iter()
            .flat_map(|s| {
                s.dq.iter().map(move |d| DerivativeRow {
                    n: s.n,
                    lambda: d.lambda,
                    spacing: s.spacing,
                    dq: d.mean,
                    dq_err: d.error,
                })
            })
            .collect();
        write_csv(p, &rows)
    })?;
    put("chif_samples.csv", &|p| {
        // stored per instance as χ_F, not χ_F/N
        let rows: Vec<SampleRow> = sample_rows(curves, |c| &c.chi_f_per_n)
            .into_iter()
            .map(|r| SampleRow {
                value: r.value * r.n as f64,
                ..r
            })
            .collect();
        write_csv(p, &rows)
    })?;
    put("chif_mean.csv", &|p| write_csv(p, &mean_rows(summaries, |s| &s.chi_f_per_n)))?;
    put("chif_peaks.csv", &|p| {
        let rows: Vec<PeakRow> = summaries
            .iter()
            .map(|s| PeakRow {
                n: s.n,
                samples: s.samples,
                peak_lambda: s.peak.lambda,
                peak_lambda_err: s.peak.lambda_err,
                peak_value: s.peak.value,
                peak_value_err: s.peak.value_err,
                peaks: s.peak.peaks,
            })
            .collect();
        write_csv(p, &rows)
    })?;
    put("answer_samples.csv", &|p| write_csv(p, &sample_rows(curves, |c| &c.p_ans)))?;
    put("answer_mean.csv", &|p| {
        let rows: Vec<AnswerRow> = summaries
            .iter()
            .flat_map(|s| {
                (0..s.p_ans.len()).map(move |k| AnswerRow {
                    n: s.n,
                    samples: s.samples,
                    lambda: s.p_ans[k].lambda,
                    p_ans: s.p_ans[k].mean,
                    p_ans_err: s.p_ans[k].error,
                    s_ans_per_n: s.s_ans_per_n[k].mean,
                    s_ans_per_n_err: s.s_ans_per_n[k].error,
                    s_ans_lower_bound: s.s_ans_bounded[k],
                })
            })
            .collect();
        write_csv(p, &rows)
    })?;
    put("energy_mean.csv", &|p| write_csv(p, &mean_rows(summaries, |s| &s.energy)))?;
    Ok(written)
}

/// Writes the scaling tables; returns the files written.
pub fn emit_scaling(out: &Path, reports: &[(Ensemble, ScalingReport)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let points: Vec<ScalingRow> = reports
        .iter()
        .flat_map(|(e, r)| {
            r.points.iter().map(move |p| ScalingRow {
                ensemble: *e,
                n: p.n,
                samples: p.samples,
                median: p.median,
                median_err: p.median_err,
                log_median: p.log_median,
                log_median_err: p.log_median_err,
                mean: p.mean,
            })
        })
        .collect();
    let fits: Vec<FitRow> = reports
        .iter()
        .flat_map(|(e, r)| {
            [&r.stretched, &r.logarithmic].into_iter().flat_map(move |f| {
                f.params.iter().map(move |p| FitRow {
                    ensemble: *e,
                    model: f.model,
                    param: p.name.clone(),
                    value: p.value,
                    error: p.error,
                    rss: f.rss,
                })
            })
        })
        .collect();
    let a = out.join("scaling.csv");
    let b = out.join("scaling_fits.csv");
    write_csv(&a, &points)?;
    write_csv(&b, &fits)?;
    Ok(vec![a, b])
}
