#![no_main]

use libfuzzer_sys::fuzz_target;
use sqd_core::hamiltonian::{parse_fcidump, write_fcidump};

fuzz_target!(|data: &str| {
    // writing drops negligible integrals, so compare the written forms:
    // write(parse(write(h))) must reproduce write(h) byte for byte
    let Ok(first) = parse_fcidump(data) else { return };
    let text = write_fcidump(&first.hamiltonian);
    let second = parse_fcidump(&text).expect("written FCIDUMP parses");
    assert_eq!(text, write_fcidump(&second.hamiltonian));
});
