#![no_main]

use libfuzzer_sys::fuzz_target;
use tpnav::scene::SceneGenConfig;

fuzz_target!(|data: &str| {
    let _ = SceneGenConfig::from_json(data);
});
