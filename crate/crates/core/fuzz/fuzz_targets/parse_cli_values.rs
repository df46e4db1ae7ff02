#![no_main]

use libfuzzer_sys::fuzz_target;
use soco::algos::Lookahead;
use soco::bench::{AlgoId, StepRule};

fuzz_target!(|data: &str| {
    let _ = data.parse::<Lookahead>();
    let _ = data.parse::<AlgoId>();
    if let Ok(rule) = data.parse::<StepRule>() {
        let _ = rule.resolve(2.6);
    }
});
