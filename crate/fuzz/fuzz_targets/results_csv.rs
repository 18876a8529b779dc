#![no_main]
use libfuzzer_sys::fuzz_target;
use qafid_core::estimators::{parse_rows, write_rows};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_rows(data) {
        let mut out = Vec::new();
        write_rows(&mut out, &rows).expect("rows serialize");
        let again = parse_rows(&out).expect("written rows parse");
        assert_eq!(rows.len(), again.len());
    }
});
