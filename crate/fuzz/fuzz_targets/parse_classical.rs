#![no_main]
use libfuzzer_sys::fuzz_target;
use qmt_core::io::{classical_to_json, parse_classical};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_classical(s) {
        let again = parse_classical(&classical_to_json(&m).to_string())
            .expect("re-encoded measure decodes");
        assert_eq!(again, m);
    }
});
