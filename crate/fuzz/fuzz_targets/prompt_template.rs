#![no_main]

use std::collections::BTreeMap;

use libfuzzer_sys::fuzz_target;
use tpnav::decision::PromptTemplate;

fuzz_target!(|data: &str| {
    let Ok(t) = PromptTemplate::parse(data) else { return };
    let values: BTreeMap<&str, String> = t.placeholders().into_iter().map(|p| (p, format!("<{p}>"))).collect();
    let _ = t.render(&values);
});
