#![no_main]
use libfuzzer_sys::fuzz_target;
use qmt_core::io::{df_to_json, parse_df};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(df) = parse_df(s) {
        // Whatever decodes must survive a round trip.
        let again = parse_df(&df_to_json(&df).to_string()).expect("re-encoded functional decodes");
        assert_eq!(again.n_atoms(), df.n_atoms());
    }
});
