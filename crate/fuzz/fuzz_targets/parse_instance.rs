#![no_main]

use cosparse::sensing::SensingInstance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(inst) = SensingInstance::parse(text) {
            assert_eq!(inst.y.len(), inst.m());
            assert_eq!(inst.x_true.len(), inst.d());
        }
    }
});
