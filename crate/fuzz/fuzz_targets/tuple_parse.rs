#![no_main]

use libfuzzer_sys::fuzz_target;
use singseries::HTuple;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // The tuple text parser must never panic; on success the canonical
        // form must round-trip through Display.
        if let Ok(tuple) = text.parse::<HTuple>() {
            let shown = tuple.to_string();
            let back: HTuple = shown.parse().expect("canonical form must re-parse");
            assert_eq!(back, tuple);
            assert!(tuple.k() >= 1);
            assert_eq!(tuple.offsets()[0], 0);
        }
    }
});
