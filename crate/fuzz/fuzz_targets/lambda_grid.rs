#![no_main]
use libfuzzer_sys::fuzz_target;
use qafid_core::exchange::parse_lambda_list;

fuzz_target!(|text: &str| {
    if let Ok(points) = parse_lambda_list(text) {
        assert!(points.iter().all(|l| (0.0..=1.0).contains(l)));
    }
});
