#![no_main]

use libfuzzer_sys::fuzz_target;
use sprphs::formats::{parse_controller, to_canonical_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_controller(text) {
        let again = to_canonical_json(&file).expect("accepted controller serializes");
        let back = parse_controller(&again).expect("round trip parses");
        assert_eq!(to_canonical_json(&back).unwrap(), again);
    }
});
