#![no_main]

use libfuzzer_sys::fuzz_target;
use sqd_core::sampler::{read_shots, write_shots};

fuzz_target!(|data: &str| {
    // both inferred and explicit orbital counts; accepted files round-trip
    for m in [None, Some(4)] {
        if let Ok(shots) = read_shots(data, m) {
            let again = read_shots(&write_shots(&shots), Some(shots.m)).expect("written shots parse");
            assert_eq!(shots, again);
        }
    }
});
