#![no_main]

use libfuzzer_sys::fuzz_target;
use tpnav::decision::{extract_json_object, parse_break_reply, parse_locate_reply, parse_status_reply};

fuzz_target!(|data: &str| {
    if let Ok(v) = extract_json_object(data) {
        assert!(v.is_object());
    }
    let _ = parse_break_reply(data);
    let _ = parse_locate_reply(data);
    let _ = parse_status_reply(data);
});
