use qafid_core::ed::{diagonalize, ed_point, thermal_observables, EdPoint};
use qafid_core::estimators::{LevelMode, MeasurementRecord};
use qafid_core::graph::Graph;
use qafid_core::hamiltonian::{build_problem, ProblemHamiltonian};
use qafid_core::instance::{generate_unique_instance, GenerationStats};
use qafid_core::simulation::{run_instance, SimulationParams};

fn params(beta: f64, lambdas: &[f64], rounds: u64) -> SimulationParams {
    SimulationParams {
        beta,
        lambdas: lambdas.to_vec(),
        thermalization: rounds / 5,
        measurement: rounds,
        sweeps_per_round: 1,
        exchange: true,
        level_mode: LevelMode::AllLevels,
        blocks: 40,
    }
}

struct Mismatch {
    worst: f64,
    report: Vec<String>,
}

/// Largest |SSE − ED| / σ over all points and observables.
fn compare(record: &MeasurementRecord, exact: &[EdPoint]) -> Mismatch {
    let mut worst = 0.0f64;
    let mut report = Vec::new();
    for (row, ed) in record.rows().iter().zip(exact) {
        let checks = [
            ("energy", row.energy, row.energy_err, ed.observables.energy),
            ("q", row.q, row.q_err, ed.observables.q),
            ("p_ans", row.p_ans, row.p_ans_err, ed.observables.p_ans),
            ("chiF", row.chi_f, row.chi_f_err, ed.chi_f),
        ];
        for (name, mc, err, exact) in checks {
            let z = (mc - exact).abs() / err.max(1e-12);
            if (mc - exact).abs() < 1e-9 {
                continue;
            }
            worst = worst.max(z);
            report.push(format!("λ={:.3} {name}: mc {mc:.5} ± {err:.5} exact {exact:.5} z={z:.2}", row.lambda));
        }
    }
    eprintln!("worst deviation {worst:.2} sigma over {} comparisons", report.len());
    Mismatch { worst, report }
}

fn exact_points(h: &ProblemHamiltonian, lambdas: &[f64], beta: f64, answer: usize) -> Vec<EdPoint> {
    lambdas
        .iter()
        .map(|&l| ed_point(h, l, beta, Some(answer)).unwrap())
        .collect()
}

#[test]
fn two_spin_bond_matches_exact() {
    let g = Graph::from_edges(2, [(0, 1)]).unwrap();
    let h = build_problem(&g, 2.0).unwrap();
    let lambdas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let beta = 16.0;
    let (record, _) = run_instance(&h, Some(&[1, -1]), &params(beta, &lambdas, 40_000), 11, "bond").unwrap();
    let m = compare(&record, &exact_points(&h, &lambdas, beta, 0b01));
    assert!(m.worst < 4.5, "{}", m.report.join("\n"));
}

#[test]
fn six_vertex_instance_matches_exact() {
    let mut stats = GenerationStats::default();
    let inst = generate_unique_instance(6, 2.0, 3, 0, 2_000_000, 100, &mut stats).unwrap();
    let h = build_problem(&inst.graph, 2.0).unwrap();
    let lambdas = [0.1, 0.25, 0.4, 0.55, 0.7, 0.85];
    let beta = 21.0;
    let (record, _) = run_instance(&h, Some(&inst.answer_spins()), &params(beta, &lambdas, 20_000), 5, "six").unwrap();
    let m = compare(&record, &exact_points(&h, &lambdas, beta, inst.answer_index()));
    assert!(m.worst < 4.5, "{}", m.report.join("\n"));
}

#[test]
fn isolated_vertex_magnetization() {
    let h = build_problem(&Graph::empty(1), 2.0).unwrap();
    let lambdas = [0.2, 0.5, 0.8];
    let beta = 5.0;
    let (record, _) = run_instance(&h, Some(&[1]), &params(beta, &lambdas, 20_000), 2, "one").unwrap();
    for (row, &l) in record.rows().iter().zip(&lambdas) {
        let spec = diagonalize(&h, l).unwrap();
        let exact = thermal_observables(&h, &spec, beta, Some(1)).unwrap();
        // p_ans of a single spin is (1 + ⟨σ⟩)/2
        let m = 2.0 * row.p_ans - 1.0;
        assert!((m - exact.magnetization[0]).abs() < 4.5 * 2.0 * row.p_ans_err, "{l}");
    }
}
