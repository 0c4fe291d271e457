#![no_main]

use libfuzzer_sys::fuzz_target;
use sqd_core::ansatz::LucjParams;

fuzz_target!(|data: &str| {
    // from_json validates shapes, so accepted parameters serialize back
    if let Ok(p) = LucjParams::from_json(data) {
        let again = LucjParams::from_json(&p.to_json()).expect("written parameters parse");
        assert_eq!(p, again);
    }
});
