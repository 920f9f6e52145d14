#![no_main]

use ifgauge::gauge::NumericSearch;
use ifgauge::harness::config::parse_gauge;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(gauge) = parse_gauge(text, NumericSearch::default()) {
        let _ = gauge.name();
    }
});
