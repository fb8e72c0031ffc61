#![no_main]

use libfuzzer_sys::fuzz_target;
use tpnav::bench::parse_tasks;

fuzz_target!(|data: &str| {
    if data.len() < 100_000 {
        let _ = parse_tasks(data);
    }
});
