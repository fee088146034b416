#![no_main]
use libfuzzer_sys::fuzz_target;
use vcrit::io::{format_model, parse_model};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = parse_model(text, "fuzz") {
            let again = parse_model(&format_model(&model.atoms, model.visibility), "fuzz").expect("formatted model reparses");
            assert_eq!(again.atoms, model.atoms);
        }
    }
});
