use std::fs;
use std::path::Path;

use qafid_experiment::aggregate::aggregate;
use qafid_experiment::figures::emit_ensemble;
use qafid_experiment::scaling::{fit_logarithmic, fit_stretched};
use qafid_experiment::{parse_config, EnsembleOptions, Store};

const TINY: &str = "[ensemble]
sizes = [4, 6]
degree = 2.0
samples = 2
seed = 17

[sse]
thermalization = 50
measurement = 100
grid_low = 0.2
grid_high = 0.8
replicas = 4
blocks = 4

[analysis]
bootstrap = 20
";

fn records(store: &Store) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(store.dir().join("records"))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn run(root: &Path, workers: usize) -> Store {
    let store = Store::open(root, &parse_config(TINY).unwrap()).unwrap();
    store
        .run_ensemble(&EnsembleOptions {
            workers,
            checkpoint_every: Some(40),
        })
        .unwrap();
    store
}

#[test]
fn ensemble_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let store = run(tmp.path(), 1);
    let results = store.results().unwrap();
    assert_eq!(results.len(), 4);
    assert!(results.iter().all(|r| r.rows.len() == 4));
    assert!(fs::read_dir(store.dir().join("checkpoints")).unwrap().next().is_none());

    let before = records(&store);
    let again = run(tmp.path(), 1);
    assert_eq!(records(&again), before, "a rerun must not touch finished records");

    let loaded = Store::load(store.dir()).unwrap();
    assert_eq!(loaded.config(), store.config());

    let sizes = aggregate(&results, 20, 3).unwrap();
    assert_eq!(sizes.iter().map(|(_, s)| s.n).collect::<Vec<_>>(), vec![4, 6]);
    let (curves, summaries): (Vec<_>, Vec<_>) = sizes.into_iter().unzip();
    let figs = tmp.path().join("figs");
    let written = emit_ensemble(&figs, &curves, &summaries).unwrap();
    assert_eq!(written.len(), 9);
    let q_samples = fs::read_to_string(figs.join("q_samples.csv")).unwrap();
    assert_eq!(q_samples.lines().count(), 1 + 4 * 4);
}

#[test]
fn records_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(records(&run(a.path(), 1)), records(&run(b.path(), 2)));
}

#[test]
fn loading_rejects_an_edited_config() {
    let tmp = tempfile::tempdir().unwrap();
    let store = run(tmp.path(), 1);
    let path = store.dir().join("config.toml");
    let edited = fs::read_to_string(&path).unwrap().replace("samples = 2", "samples = 3");
    fs::write(&path, edited).unwrap();
    assert!(Store::load(store.dir()).is_err());
}

// Reference values from scipy.optimize.curve_fit and numpy.linalg.lstsq on
// y = 0.5 N^0.45 + 1 + 0.05 sin N.
#[test]
fn fits_match_independent_least_squares() {
    let ns = [20.0, 40.0, 60.0, 80.0, 100.0, 120.0];
    let ys: Vec<f64> = ns.iter().map(|n: &f64| 0.5 * n.powf(0.45) + 1.0 + 0.05 * n.sin()).collect();

    let (a, b, c, rss) = fit_stretched(&ns, &ys).unwrap();
    assert!((b - 0.547_609_77).abs() < 1e-4, "b = {b}");
    assert!((a - 0.271_014_72).abs() < 1e-4, "a = {a}");
    assert!((c - 1.587_609_4).abs() < 1e-3, "c = {c}");
    assert!((rss - 3.337_696_4e-3).abs() < 1e-8, "rss = {rss}");

    let (c, d, rss) = fit_logarithmic(&ns, &ys).unwrap();
    assert!((c + 1.021_453_49).abs() < 1e-8);
    assert!((d - 1.292_522_58).abs() < 1e-8);
    assert!((rss - 7.802_323_97e-2).abs() < 1e-9);
}
