#![no_main]
use libfuzzer_sys::fuzz_target;
use qmt_core::io::parse_directions;
use qmt_core::quantum::{build_df_sym, singlet_state};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(dirs) = parse_directions(s) {
        build_df_sym(&singlet_state(), &dirs).expect("validated directions build");
    }
});
