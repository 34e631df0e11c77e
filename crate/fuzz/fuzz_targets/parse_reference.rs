#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = sprphs::formats::parse_reference(text) {
        for t in [-1.0, 0.0, 0.5, 1e9] {
            let _ = r.at(t, 1);
        }
    }
});
