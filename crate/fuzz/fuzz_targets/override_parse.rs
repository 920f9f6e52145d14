#![no_main]

use ifgauge::harness::config::parse_override;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((key, _value)) = parse_override(text) {
        assert!(!key.is_empty());
    }
});
