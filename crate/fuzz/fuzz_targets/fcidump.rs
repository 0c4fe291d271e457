#![no_main]

use libfuzzer_sys::fuzz_target;
use sqd_core::hamiltonian::parse_fcidump;

fuzz_target!(|data: &str| {
    // malformed headers, indices and numbers must come back as errors
    if let Ok(f) = parse_fcidump(data) {
        assert!(f.hamiltonian.is_symmetric());
    }
});
