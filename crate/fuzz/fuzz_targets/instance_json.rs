#![no_main]
use libfuzzer_sys::fuzz_target;
use qafid_core::instance::parse_instance_file;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = parse_instance_file(data) {
        if let Ok(inst) = file.instance() {
            assert!(inst.graph.is_independent(&inst.answer));
            assert_eq!(inst.answer.iter().filter(|&&b| b).count(), inst.mis_size);
        } else {
            let _ = file.graph();
        }
    }
});
