#![no_main]
use libfuzzer_sys::fuzz_target;
use qafid_experiment::parse_config;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&cfg.to_toml()).expect("serialized config parses");
        assert_eq!(cfg.hash(), again.hash());
    }
});
