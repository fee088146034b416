#![no_main]
use libfuzzer_sys::fuzz_target;
use vcrit::io::{format_angles, parse_angle, parse_angles};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_angle(text);
        if let Ok(angles) = parse_angles(text, "fuzz") {
            let again = parse_angles(&format_angles(&angles), "fuzz").expect("formatted angles reparse");
            assert_eq!(again.to_flat().len(), angles.to_flat().len());
        }
    }
});
