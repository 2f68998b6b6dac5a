#![no_main]

use cosparse::packing::{verify_packing, Packing};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(pk) = Packing::parse(text) else { return };
    // A parsed certified packing must survive an independent re-check.
    if pk.certified {
        assert!(verify_packing(&pk.points, pk.delta).unwrap().0);
    }
});
