#![no_main]
use libfuzzer_sys::fuzz_target;
use vcrit::io::{parse_density_matrix, ReadOptions};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for repair in [false, true] {
            if let Ok(file) = parse_density_matrix(text, "fuzz", &ReadOptions { repair }) {
                assert!(file.matrix.validate().is_ok());
            }
        }
    }
});
