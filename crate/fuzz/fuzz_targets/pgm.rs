#![no_main]

use libfuzzer_sys::fuzz_target;
use tpnav::planner::parse_pgm;

fuzz_target!(|data: &[u8]| {
    let _ = parse_pgm(data);
});
