#![no_main]

use libfuzzer_sys::fuzz_target;
use tpnav::scene::Scene;

fuzz_target!(|data: &str| {
    if let Ok(scene) = Scene::from_json(data) {
        // Accepted scenes must survive a round trip.
        let text = scene.to_json();
        assert_eq!(Scene::from_json(&text).expect("round trip"), scene);
    }
});
