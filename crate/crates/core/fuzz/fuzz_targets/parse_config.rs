#![no_main]

use libfuzzer_sys::fuzz_target;
use soco::bench::{parse_config, Scenario};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(pairs) = parse_config(text) else {
        return;
    };
    // overrides must either apply cleanly or be rejected, never panic
    for name in ["planning", "quadrotor", "lowerbound"] {
        let mut scenario = Scenario::by_name(name).unwrap();
        let _ = scenario.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    }
});
