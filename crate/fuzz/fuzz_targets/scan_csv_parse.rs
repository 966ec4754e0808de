#![no_main]

use libfuzzer_sys::fuzz_target;
use singseries::report::parse_scan_csv;

fuzz_target!(|data: &[u8]| {
    // The schema parser must never panic, only return Err on junk.
    if let Ok(records) = parse_scan_csv(data) {
        for r in &records {
            // The tuple column may still be junk; parsing it must not panic.
            let _ = r.parse_tuple();
        }
    }
});
