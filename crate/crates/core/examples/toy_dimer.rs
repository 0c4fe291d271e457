//! Writes a (4e,4o) toy-dimer scan: FCIDUMPs for several "separations", an
//! uncoupled reference, LUCJ parameters, and PES configs for SQD and the
//! exact oracle.
//!
//! ```text
//! cargo run -p sqd-core --example toy_dimer -- configs/toy_dimer
//! ```

use std::fs;
use std::path::PathBuf;

use serde_json::json;
use sqd_core::ansatz::LucjParams;
use sqd_core::hamiltonian::write_fcidump;
use sqd_core::toy::{block_dimer, coupled_dimer, random_hamiltonian};

const SEPARATIONS: [&str; 4] = ["1.0", "1.5", "2.0", "3.0"];
const UNBOUND: &str = "48.0";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "configs/toy_dimer".into()));
    fs::create_dir_all(&dir)?;

    let a = random_hamiltonian(2, 1, 1, 101)?;
    let b = random_hamiltonian(2, 1, 1, 202)?;
    let mut points = Vec::new();
    for (i, label) in SEPARATIONS.iter().enumerate() {
        let r: f64 = label.parse()?;
        let h = coupled_dimer(&a, &b, 0.08 * (1.0 - r).exp(), 300 + i as u64)?;
        fs::write(dir.join(format!("{label}.fcidump")), write_fcidump(&h))?;
        points.push(json!({ "label": label, "fcidump": format!("{label}.fcidump") }));
    }
    let unbound = block_dimer(&a, &b)?;
    fs::write(dir.join(format!("{UNBOUND}.fcidump")), write_fcidump(&unbound))?;
    points.push(json!({ "label": UNBOUND, "fcidump": format!("{UNBOUND}.fcidump"), "unbound": true }));

    fs::write(dir.join("lucj.json"), LucjParams::perturbative(&unbound, 0.3, 7).to_json())?;

    let sqd = json!({
        "description": "Toy (4e,4o) dimer scan with SQD on noisy emulated shots",
        "run": {
            "method": "sqd",
            "ansatz": "lucj.json",
            "n_shots": 20000,
            "noise": { "flip_probability": 0.01 },
            "recovery": { "k_batches": 4, "batch_size": 2000, "max_steps": 5 },
            "solver": { "compute_variance": true },
            "seed": 1
        },
        "points": points,
    });
    let oracle = json!({
        "description": "Toy (4e,4o) dimer scan, exact diagonalization",
        "run": { "method": "casci_oracle" },
        "points": points,
    });
    let single = json!({
        "label": "1.0",
        "fcidump": "1.0.fcidump",
        "method": "sqd",
        "ansatz": "lucj.json",
        "n_shots": 5000,
        "recovery": { "k_batches": 3, "batch_size": 60, "max_steps": 4 },
        "extrapolation": [40, 60, 90, 140],
        "seed": 3
    });
    for (name, value) in [("pes_sqd.json", sqd), ("pes_oracle.json", oracle), ("run.json", single)] {
        fs::write(dir.join(name), serde_json::to_string_pretty(&value)? + "\n")?;
    }
    println!("wrote toy dimer inputs to {}", dir.display());
    Ok(())
}
