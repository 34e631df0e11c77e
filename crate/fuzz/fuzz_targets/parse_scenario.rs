#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = sprphs::formats::parse_scenario(text) {
        // a validated scenario must also answer the cheap derived queries
        let _ = cfg.warnings();
        let _ = cfg.simulation_options();
    }
});
