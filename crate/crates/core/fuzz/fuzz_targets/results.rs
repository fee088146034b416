#![no_main]
use libfuzzer_sys::fuzz_target;
use vcrit::io::{format_results, parse_results};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(records) = parse_results(text, "fuzz") {
            if let Ok(out) = format_results(&records) {
                let _ = parse_results(&out, "fuzz");
            }
        }
    }
});
