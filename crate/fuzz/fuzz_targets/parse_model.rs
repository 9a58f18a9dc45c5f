#![no_main]
use libfuzzer_sys::fuzz_target;
use qmt_core::io::{model_to_json, parse_model};
use qmt_core::screening::{check_classical_screening, check_quantal_screening, ModelMeasure};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(m) = parse_model(s) else { return };
    parse_model(&model_to_json(&m).to_string()).expect("re-encoded model decodes");
    // The checks may refuse a model but must not panic on one.
    let _ = match m.measure() {
        ModelMeasure::Classical(_) => check_classical_screening(&m),
        ModelMeasure::Quantal(_) => check_quantal_screening(&m),
    };
});
