#![no_main]
use libfuzzer_sys::fuzz_target;
use qmt_core::io::parse_pattern;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = parse_pattern(s) {
        assert_eq!(parse_pattern(&p.to_string()), Ok(p));
    }
});
