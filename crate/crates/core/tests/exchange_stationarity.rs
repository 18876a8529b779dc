use qafid_core::estimators::LevelMode;
use qafid_core::exchange::LambdaGrid;
use qafid_core::graph::Graph;
use qafid_core::hamiltonian::build_problem;
use qafid_core::simulation::{run_instance, SimulationParams};

fn run(exchange: bool, seed: u64) -> Vec<qafid_core::estimators::ResultRow> {
    let h = build_problem(&Graph::from_edges(2, [(0, 1)]).unwrap(), 2.0).unwrap();
    let params = SimulationParams {
        beta: 7.0,
        lambdas: LambdaGrid::new(0.05, 0.95, 8).unwrap().points(),
        thermalization: 2_000,
        measurement: 20_000,
        sweeps_per_round: 1,
        exchange,
        level_mode: LevelMode::AllLevels,
        blocks: 40,
    };
    let (record, diag) = run_instance(&h, Some(&[1, -1]), &params, seed, "bond").unwrap();
    if exchange {
        assert!(diag.pairs[0].iter().all(|p| p.attempts > 0));
    }
    record.rows()
}

#[test]
fn exchange_preserves_marginals() {
    let with = run(true, 1);
    let without = run(false, 2);
    for (a, b) in with.iter().zip(&without) {
        for (name, x, ex, y, ey) in [
            ("n", a.n_mean, 0.0, b.n_mean, 0.0),
            ("energy", a.energy, a.energy_err, b.energy, b.energy_err),
            ("q", a.q, a.q_err, b.q, b.q_err),
        ] {
            // n_mean and energy share errors up to the factor β
            let (ex, ey) = if name == "n" {
                (a.energy_err * 7.0, b.energy_err * 7.0)
            } else {
                (ex, ey)
            };
            let sigma = (ex * ex + ey * ey).sqrt();
            assert!((x - y).abs() < 4.0 * sigma, "λ={} {name}: {x} vs {y} (σ {sigma})", a.lambda);
        }
    }
}
