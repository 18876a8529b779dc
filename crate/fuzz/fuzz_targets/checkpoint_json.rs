#![no_main]
use libfuzzer_sys::fuzz_target;
use qafid_core::graph::Graph;
use qafid_core::hamiltonian::build_problem;
use qafid_core::simulation::{parse_checkpoint, PairedRun};

fuzz_target!(|data: &[u8]| {
    let Ok(snap) = parse_checkpoint(data) else {
        return;
    };
    let n = snap.record.n_sites;
    if n == 0 || n > 64 {
        return;
    }
    // restoring checks the snapshot against the instance; a path graph is
    // as good as any for exercising that validation
    let g = Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("path graph");
    let h = build_problem(&g, 2.0).expect("valid penalty");
    if let Ok(mut run) = PairedRun::restore(&h, snap) {
        run.advance(2);
    }
});
