#![no_main]

use ifgauge::harness::SimulationConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = SimulationConfig::parse(text) {
        // Anything accepted must survive a round trip through its own text form.
        let again = SimulationConfig::parse(&config.to_text()).expect("reparse of emitted config");
        assert!(config.same_problem(&again));
    }
});
