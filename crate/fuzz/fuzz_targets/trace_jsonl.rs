#![no_main]

use libfuzzer_sys::fuzz_target;
use tpnav::orchestrator::{parse_trace, steps};

fuzz_target!(|data: &str| {
    if let Ok(records) = parse_trace(data) {
        let _ = steps(&records).count();
    }
});
