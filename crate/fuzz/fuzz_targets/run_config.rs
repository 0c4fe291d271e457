#![no_main]

use libfuzzer_sys::fuzz_target;
use sqd_core::workflow::{plan_pes, PesConfig, RunConfig};

fuzz_target!(|data: &str| {
    if let Ok(cfg) = RunConfig::from_json(data) {
        let _ = cfg.validate();
        let _ = cfg.batch_sizes();
    }
    if let Ok(cfg) = PesConfig::from_json(data) {
        let _ = cfg.point_runs();
        // without an explicit active space the plan would read FCIDUMP paths
        // named by the input; keep the fuzzer off the filesystem
        if cfg.run.active_space.is_some() {
            let _ = plan_pes(&cfg);
        }
    }
});
