#![no_main]
use libfuzzer_sys::fuzz_target;
use qmt_core::io::{parse_state, state_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(state) = parse_state(s) {
        state
            .density()
            .expect("validated state has a density matrix");
        parse_state(&state_to_json(&state).to_string()).expect("re-encoded state decodes");
    }
});
