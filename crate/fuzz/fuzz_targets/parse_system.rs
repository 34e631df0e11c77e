#![no_main]

use libfuzzer_sys::fuzz_target;
use sprphs::formats::{parse_system, to_canonical_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sys) = parse_system(text) {
        let again = to_canonical_json(&sys).expect("accepted system serializes");
        assert_eq!(parse_system(&again).expect("round trip parses"), sys);
    }
});
