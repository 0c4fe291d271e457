#![no_main]

use libfuzzer_sys::fuzz_target;
use sqd_core::extrapolate::{fit_zero_variance, read_variance_log, select_points, Weighting};

fuzz_target!(|data: &str| {
    let Ok(points) = read_variance_log(data) else { return };
    let Ok(selected) = select_points(&points, None) else { return };
    for w in [Weighting::Equal, Weighting::InverseVariance] {
        // singular or invalid fits are errors; finite inputs never panic
        let _ = fit_zero_variance(&selected, w);
    }
});
