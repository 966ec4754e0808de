#![no_main]

use libfuzzer_sys::fuzz_target;
use singseries_cli::ConfigFile;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Config parsing must never panic on arbitrary TOML.
        let _ = ConfigFile::parse_toml(text);
    }
});
