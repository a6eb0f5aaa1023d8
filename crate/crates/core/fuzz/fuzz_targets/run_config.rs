#![no_main]

use libfuzzer_sys::fuzz_target;
use nonsmooth_control::harness::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        // Anything accepted must survive a round trip unchanged.
        let back = serde_json::to_string(&cfg).expect("valid config serializes");
        assert_eq!(RunConfig::from_json(&back).expect("round trip parses"), cfg);
    }
});
