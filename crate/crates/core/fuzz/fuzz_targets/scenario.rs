#![no_main]
use libfuzzer_sys::fuzz_target;
use vcrit::Scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = text.parse::<Scenario>() {
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
        }
    }
});
