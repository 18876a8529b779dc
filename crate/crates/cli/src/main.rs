use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qafid_core::ed::{ed_point, EdRow, MAX_ED_SITES};
use qafid_core::estimators::{write_rows, LevelMode};
use qafid_core::exchange::{parse_lambda_list, LambdaGrid};
use qafid_core::graph::generate_er_graph;
use qafid_core::hamiltonian::{build_problem, DEFAULT_PENALTY};
use qafid_core::instance::{
    enumerate_all_mis, generate_unique_instance, parse_instance_file, GenerationStats, InstanceFile, VertexLabel,
    DEFAULT_SOLUTION_BUDGET,
};
use qafid_core::rng::{derive_seed, stream};
use qafid_core::simulation::{parse_checkpoint, PairedRun, SimulationParams};
use qafid_core::solver::{dplr, BranchRule, SolveOptions, DEFAULT_STEP_BUDGET};
use qafid_experiment::aggregate::aggregate;
use qafid_experiment::figures::{emit_ensemble, emit_scaling};
use qafid_experiment::scaling::{collect_steps, scaling_fit, Ensemble, StepOptions};
use qafid_experiment::store::{instance_id, write_once, write_replace, Store};
use qafid_experiment::{parse_config, EnsembleOptions, ErrorClass, ExperimentError};

#[derive(Parser)]
#[command(name = "qafid", version, about = "Quantum annealing fidelity-susceptibility laboratory")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory (stdout where a command supports it).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate random or unique-solution instances.
    Gen(GenArgs),
    /// Solve an instance exactly with DPLR.
    Solve(SolveArgs),
    /// Exact-diagonalization observables over a λ grid.
    Ed(EdArgs),
    /// Monte Carlo run of an ensemble config or a single instance.
    Run(RunArgs),
    /// Sample averages with bootstrap errors for a result store.
    Aggregate(StoreArgs),
    /// DPLR cost scaling and the two model fits.
    Fit(FitArgs),
    /// Plot-ready tables for a result store.
    Figures(StoreArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Er,
    Unique,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    MaxDegree,
    Random,
}

impl BranchArg {
    fn rule(self, seed: u64) -> BranchRule {
        match self {
            BranchArg::MaxDegree => BranchRule::MaxDegree,
            BranchArg::Random => BranchRule::Random { seed },
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(short = 'n', long)]
    n: usize,
    #[arg(long, alias = "count", default_value_t = 1)]
    samples: usize,
    #[arg(long, default_value_t = 3.0)]
    degree: f64,
    #[arg(long, value_enum, default_value = "unique")]
    ensemble: EnsembleArg,
    /// Cap on enumerated maximum sets per graph.
    #[arg(long, default_value_t = DEFAULT_SOLUTION_BUDGET)]
    solution_budget: usize,
    #[arg(long, default_value_t = 1000)]
    max_attempts: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "max-degree")]
    branch: BranchArg,
    #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
    step_budget: u64,
    /// List every maximum set and the backbone labels instead.
    #[arg(long)]
    enumerate: bool,
    #[arg(long, default_value_t = DEFAULT_SOLUTION_BUDGET)]
    solution_budget: usize,
}

#[derive(Args)]
struct EdArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Inverse temperature; default 3.5 N.
    #[arg(long)]
    beta: Option<f64>,
    /// `a,b,c` or `low:high:count`.
    #[arg(long, default_value = "0.02:0.98:49")]
    lambdas: String,
    #[arg(long, default_value_t = DEFAULT_PENALTY)]
    penalty: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Ensemble configuration (TOML).
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    config: Option<PathBuf>,
    /// Single instance file.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Rounds between checkpoints.
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[command(flatten)]
    single: SingleRun,
}

#[derive(Args)]
struct SingleRun {
    /// Inverse temperature for `--in`; default 3.5 N.
    #[arg(long, conflicts_with = "beta_mult")]
    beta: Option<f64>,
    /// β in units of N.
    #[arg(long)]
    beta_mult: Option<f64>,
    /// Explicit grid for `--in`, overriding the low/high/replicas grid.
    #[arg(long)]
    lambdas: Option<String>,
    #[arg(long, default_value_t = 0.02)]
    grid_low: f64,
    #[arg(long, default_value_t = 0.98)]
    grid_high: f64,
    #[arg(long, default_value_t = 32)]
    replicas: usize,
    #[arg(long, alias = "therm", default_value_t = 10_000)]
    thermalization: u64,
    #[arg(long, alias = "mcs", default_value_t = 10_000)]
    measurement: u64,
    /// Sweeps between exchange attempts.
    #[arg(long, alias = "exchange-every", default_value_t = 1)]
    sweeps_per_round: usize,
    #[arg(long)]
    no_exchange: bool,
    #[arg(long)]
    random_level: bool,
    #[arg(long, default_value_t = 32)]
    blocks: u64,
    #[arg(long, default_value_t = DEFAULT_PENALTY)]
    penalty: f64,
}

#[derive(Args)]
struct StoreArgs {
    /// Store directory (`<root>/<config hash>`).
    #[arg(long)]
    store: PathBuf,
    /// Bootstrap resamples; default from the stored config.
    #[arg(long)]
    bootstrap: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_delimiter = ',', default_value = "20,40,60,80,100,120")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 3.0)]
    degree: f64,
    #[arg(long, value_enum, default_value = "both")]
    ensemble: EnsembleArg,
    #[arg(long, value_enum, default_value = "random")]
    branch: BranchArg,
    #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
    step_budget: u64,
    #[arg(long, default_value_t = DEFAULT_SOLUTION_BUDGET)]
    solution_budget: usize,
    #[arg(long, default_value_t = 1000)]
    max_attempts: usize,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
}

fn read_instance(path: &Path) -> Result<InstanceFile> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_instance_file(&bytes)?)
}

/// Writes to `out/name` when `--out` is set, else to stdout.
fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_replace(&dir.join(name), bytes)?;
            eprintln!("wrote {}", dir.join(name).display());
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn ensembles(e: EnsembleArg) -> Vec<Ensemble> {
    match e {
        EnsembleArg::Er => vec![Ensemble::Er],
        EnsembleArg::Unique => vec![Ensemble::Unique],
        EnsembleArg::Both => vec![Ensemble::Er, Ensemble::Unique],
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

fn gen(c: &Common, a: &GenArgs) -> Result<()> {
    let seed = c.seed.unwrap_or(1);
    let out = c.out.as_deref().context("gen needs --out")?;
    fs::create_dir_all(out)?;
    for s in 0..a.samples {
        let (id, file) = match a.ensemble {
            EnsembleArg::Er => {
                let g = generate_er_graph(a.n, a.degree, &mut stream(seed, &[a.n as u64, s as u64]))?;
                (instance_id(a.n, s, seed), InstanceFile::from_graph(&g))
            }
            EnsembleArg::Unique => {
                let mut stats = GenerationStats::default();
                let inst = generate_unique_instance(
                    a.n,
                    a.degree,
                    seed,
                    s as u64,
                    a.solution_budget,
                    a.max_attempts,
                    &mut stats,
                )?;
                log::info!("sample {s}: {} attempt(s), {} edge(s) added", stats.attempts, inst.added_edges);
                (instance_id(a.n, s, inst.seed), InstanceFile::from_instance(&inst))
            }
            EnsembleArg::Both => bail!("gen takes --ensemble er or unique"),
        };
        let path = out.join(format!("{id}.json"));
        write_once(&path, file.to_json().as_bytes())?;
        println!("{}", path.display());
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct Enumeration {
    mis_size: usize,
    solution_count: usize,
    solutions: Vec<Vec<u8>>,
    labels: Vec<VertexLabel>,
}

fn solve(c: &Common, a: &SolveArgs) -> Result<()> {
    let g = read_instance(&a.input)?.graph()?;
    if a.enumerate {
        let all = enumerate_all_mis(&g, a.solution_budget)?;
        let json = serde_json::to_string_pretty(&Enumeration {
            mis_size: all.mis_size,
            solution_count: all.solutions.len(),
            solutions: all
                .solutions
                .iter()
                .map(|s| s.iter().map(|&b| u8::from(b)).collect())
                .collect(),
            labels: all.labels,
        })? + "\n";
        return emit(c.out.as_deref(), "solutions.json", json.as_bytes());
    }
    let opts = SolveOptions {
        branch: a.branch.rule(c.seed.unwrap_or(1)),
        step_budget: a.step_budget,
    };
    let res = dplr(&g, &opts)?;
    let json = serde_json::to_string_pretty(&res)? + "\n";
    emit(c.out.as_deref(), "solution.json", json.as_bytes())
}

fn ed(c: &Common, a: &EdArgs) -> Result<()> {
    let file = read_instance(&a.input)?;
    if file.n > MAX_ED_SITES {
        bail!(qafid_core::Error::SizeTooLarge { n: file.n, max: MAX_ED_SITES });
    }
    let answer = match file.answer {
        Some(_) => Some(file.instance()?.answer_index()),
        None => None,
    };
    let h = build_problem(&file.graph()?, a.penalty)?;
    let beta = a.beta.unwrap_or(3.5 * file.n as f64);
    let id = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    let mut w = csv::Writer::from_writer(Vec::new());
    for lambda in parse_lambda_list(&a.lambdas)? {
        w.serialize(EdRow::new(id, &ed_point(&h, lambda, beta, answer)?))?;
    }
    let bytes = w.into_inner()?;
    emit(c.out.as_deref(), &format!("{id}.ed.csv"), &bytes)
}

fn run(c: &Common, a: &RunArgs) -> Result<()> {
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = parse_config(&text)?;
        if let Some(seed) = c.seed {
            cfg.ensemble.seed = seed;
        }
        let root = c.out.as_deref().unwrap_or(Path::new("results"));
        let store = Store::open(root, &cfg)?;
        eprintln!("store {}", store.dir().display());
        let manifest = store.run_ensemble(&EnsembleOptions {
            workers: c.workers,
            checkpoint_every: a.checkpoint_every,
        })?;
        let low = manifest.instances.iter().filter(|e| e.low_acceptance_pairs > 0).count();
        if low > 0 {
            eprintln!("warning: {low} instance(s) with exchange acceptance below 5% at some pair");
        }
        println!("{}", store.dir().display());
        return Ok(());
    }
    let input = a.input.as_deref().expect("clap enforces --config or --in");
    let file = read_instance(input)?;
    let answer = match file.answer {
        Some(_) => Some(file.instance()?.answer_spins()),
        None => None,
    };
    let s = &a.single;
    let h = build_problem(&file.graph()?, s.penalty)?;
    let lambdas = match &s.lambdas {
        Some(list) => parse_lambda_list(list)?,
        None => LambdaGrid::new(s.grid_low, s.grid_high, s.replicas)?.points(),
    };
    let params = SimulationParams {
        beta: s.beta.unwrap_or(s.beta_mult.unwrap_or(3.5) * file.n as f64),
        lambdas,
        thermalization: s.thermalization,
        measurement: s.measurement,
        sweeps_per_round: s.sweeps_per_round,
        exchange: !s.no_exchange,
        level_mode: if s.random_level { LevelMode::RandomLevel } else { LevelMode::AllLevels },
        blocks: s.blocks,
    };
    let id = input.file_stem().and_then(|s| s.to_str()).unwrap_or("instance").to_string();
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    let ckpt = out.join(format!("{id}.checkpoint.json"));
    let seed = derive_seed(c.seed.unwrap_or(1), &[file.n as u64]);
    let mut run = if ckpt.exists() {
        eprintln!("resuming from {}", ckpt.display());
        let snap = parse_checkpoint(&fs::read(&ckpt)?)?;
        if snap.params != params {
            bail!(qafid_core::Error::InvalidCheckpoint(
                "checkpoint parameters differ from the command line".into()
            ));
        }
        PairedRun::restore(&h, snap)?
    } else {
        PairedRun::new(&h, answer.as_deref(), &params, seed, &id)?
    };
    let pool = pool(c.workers)?;
    let step = a.checkpoint_every.unwrap_or(u64::MAX).max(1);
    pool.install(|| -> Result<()> {
        while !run.advance(step) {
            write_replace(&ckpt, &serde_json::to_vec(&run.snapshot())?)?;
            log::info!("{} / {} rounds", run.rounds_done(), run.total_rounds());
        }
        Ok(())
    })?;
    let mut csv = Vec::new();
    write_rows(&mut csv, &run.record().rows())?;
    write_replace(&out.join(format!("{id}.csv")), &csv)?;
    write_replace(
        &out.join(format!("{id}.diagnostics.json")),
        serde_json::to_string_pretty(&run.diagnostics())?.as_bytes(),
    )?;
    if ckpt.exists() {
        fs::remove_file(&ckpt)?;
    }
    println!("{}", out.join(format!("{id}.csv")).display());
    Ok(())
}

fn load_store(a: &StoreArgs) -> Result<(Store, usize)> {
    let store = Store::load(&a.store)?;
    let b = a.bootstrap.unwrap_or(store.config().analysis.bootstrap);
    Ok((store, b))
}

fn aggregate_cmd(c: &Common, a: &StoreArgs) -> Result<()> {
    let (store, b) = load_store(a)?;
    let results = store.results()?;
    let seed = c.seed.unwrap_or(store.config().ensemble.seed);
    let sets = aggregate(&results, b, seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "samples", "observable", "lambda", "mean", "error"])?;
    for (_, s) in &sets {
        let named = [
            ("q", &s.q),
            ("chiF_per_n", &s.chi_f_per_n),
            ("p_ans", &s.p_ans),
            ("s_ans_per_n", &s.s_ans_per_n),
            ("energy", &s.energy),
            ("dq", &s.dq),
        ];
        for (name, pts) in named {
            for p in pts.iter() {
                w.serialize((s.n, s.samples, name, p.lambda, p.mean, p.error))?;
            }
        }
        eprintln!(
            "N={:>3} samples={:>4} chiF/N peak {:.4} ± {:.4} at λ = {:.4} ± {:.4} ({} peak(s))",
            s.n, s.samples, s.peak.value, s.peak.value_err, s.peak.lambda, s.peak.lambda_err, s.peak.peaks
        );
    }
    let bytes = w.into_inner()?;
    emit(c.out.as_deref(), "aggregate.csv", &bytes)
}

fn figures(c: &Common, a: &StoreArgs) -> Result<()> {
    let (store, b) = load_store(a)?;
    let results = store.results()?;
    let seed = c.seed.unwrap_or(store.config().ensemble.seed);
    let sets = aggregate(&results, b, seed)?;
    let (curves, summaries): (Vec<_>, Vec<_>) = sets.into_iter().unzip();
    let out = c.out.clone().unwrap_or_else(|| store.dir().join("figures"));
    for p in emit_ensemble(&out, &curves, &summaries)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn fit(c: &Common, a: &FitArgs) -> Result<()> {
    let seed = c.seed.unwrap_or(1);
    let pool = pool(c.workers)?;
    let mut reports = Vec::new();
    for ensemble in ensembles(a.ensemble) {
        let opts = StepOptions {
            ensemble,
            degree: a.degree,
            seed,
            branch: a.branch.rule(seed),
            step_budget: a.step_budget,
            solution_budget: a.solution_budget,
            max_attempts: a.max_attempts,
        };
        let data = a
            .sizes
            .iter()
            .map(|&n| {
                let steps = pool.install(|| collect_steps(n, a.samples, &opts))?;
                log::info!("{ensemble} N={n}: {} samples", steps.len());
                Ok((n, steps))
            })
            .collect::<Result<Vec<_>>>()?;
        let report = scaling_fit(&data, a.bootstrap, seed)?;
        let b = report.stretched.param("b").expect("stretched fit has b");
        eprintln!(
            "{ensemble}: b = {:.3} ± {:.3}; rss stretched {:.4e}, logarithmic {:.4e}",
            b.value, b.error, report.stretched.rss, report.logarithmic.rss
        );
        if !report.stretched_preferred() {
            eprintln!("note: {ensemble} data is fitted at least as well by the logarithmic model");
        }
        reports.push((ensemble, report));
    }
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    for p in emit_scaling(&out, &reports)? {
        println!("{}", p.display());
    }
    Ok(())
}

/// Exit code for an error chain: 2 validation, 3 runtime, 4 budget.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            return match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Runtime => 3,
                ErrorClass::Budget => 4,
            };
        }
        if let Some(e) = cause.downcast_ref::<qafid_core::Error>() {
            return match e {
                e if e.is_budget() => 4,
                qafid_core::Error::Io(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let c = &cli.common;
    let res = match &cli.cmd {
        Cmd::Gen(a) => gen(c, a),
        Cmd::Solve(a) => solve(c, a),
        Cmd::Ed(a) => ed(c, a),
        Cmd::Run(a) => run(c, a),
        Cmd::Aggregate(a) => aggregate_cmd(c, a),
        Cmd::Fit(a) => fit(c, a),
        Cmd::Figures(a) => figures(c, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
