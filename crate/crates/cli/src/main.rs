//! `sqd`: command-line front end for sample-based quantum diagonalization.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! numerical failures (no convergence, singular fits, oversized problems).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;
use sqd_core::ansatz::{prepare_lucj, LucjParams};
use sqd_core::extrapolate::{fit_zero_variance, read_variance_log_file, select_points, Weighting};
use sqd_core::fock::{build_dense, DENSE_CAP};
use sqd_core::sampler::{format_bits, read_shots_file, sample, write_shots, NoiseSpec};
use sqd_core::solver::{hci_ground, HciOptions};
use sqd_core::workflow::{self, PesConfig};
use sqd_core::{ActiveSpaceHamiltonian, Error};

#[derive(Parser, Debug)]
#[command(name = "sqd", version, about = "Sample-based quantum diagonalization for binding energies")]
struct Cli {
    /// JSON configuration file (run or pes).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for CSV, JSONL and provenance outputs.
    #[arg(long, global = true, default_value = "sqd-out")]
    out_dir: PathBuf,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SQD_THREADS")]
    threads: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single calculation described by --config.
    Run,
    /// Potential-energy-surface scan described by --config.
    Pes {
        /// Validate the config and print the plan without computing.
        #[arg(long)]
        dry_run: bool,
        /// Skip points recorded in an existing manifest in --out-dir.
        #[arg(long)]
        resume: bool,
    },
    /// Fit energies against relative variance and report the zero-variance
    /// intercept.
    Extrapolate {
        /// JSONL variance log (one point per line).
        #[arg(long)]
        log: PathBuf,
        /// Batch sizes to fit; defaults to every size in the log.
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = WeightingArg::Equal)]
        weighting: WeightingArg,
    },
    /// Exact ground-state energy by dense diagonalization of the sector.
    Oracle {
        #[command(flatten)]
        input: HamiltonianInput,
    },
    /// Heat-bath selected-CI baseline.
    Hci {
        #[command(flatten)]
        input: HamiltonianInput,
        /// Nonincreasing selection thresholds.
        #[arg(long, value_delimiter = ',', default_value = "1e-3,1e-4,1e-5")]
        eps1: Vec<f64>,
        #[arg(long, default_value_t = 2_000_000)]
        max_determinants: usize,
    },
    /// Generate or inspect shot files.
    #[command(subcommand)]
    Shots(ShotsCommand),
}

#[derive(Args, Debug)]
struct HamiltonianInput {
    #[arg(long)]
    fcidump: PathBuf,
    /// Overrides the alpha electron count from the FCIDUMP header.
    #[arg(long, requires = "n_beta")]
    n_alpha: Option<usize>,
    /// Overrides the beta electron count from the FCIDUMP header.
    #[arg(long, requires = "n_alpha")]
    n_beta: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum ShotsCommand {
    /// Sample an LUCJ state on the emulated noisy device.
    Generate {
        #[arg(long)]
        fcidump: PathBuf,
        #[arg(long)]
        ansatz: PathBuf,
        #[arg(long)]
        n_shots: usize,
        #[arg(long, default_value_t = 0.01)]
        flip_probability: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Summarize a shot file.
    Inspect {
        file: PathBuf,
        /// Orbital count; inferred from the first bitstring when omitted.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, requires = "n_beta")]
        n_alpha: Option<usize>,
        #[arg(long, requires = "n_alpha")]
        n_beta: Option<usize>,
        /// Number of most frequent bitstrings to list.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WeightingArg {
    Equal,
    InverseVariance,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Equal => Weighting::Equal,
            WeightingArg::InverseVariance => Weighting::InverseVariance,
        }
    }
}

fn print_json(value: &serde_json::Value) {
    let text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn require_config(cli: &Cli) -> Result<&Path, Error> {
    cli.config
        .as_deref()
        .ok_or_else(|| Error::Config("this command needs --config <path>".into()))
}

fn load(input: &HamiltonianInput) -> Result<ActiveSpaceHamiltonian, Error> {
    let h = workflow::load_hamiltonian(&input.fcidump)?;
    match (input.n_alpha, input.n_beta) {
        (Some(a), Some(b)) => h.with_sector(a, b),
        _ => Ok(h),
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Run => {
            let mut cfg = workflow::read_run_config(require_config(cli)?)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let outcome = workflow::run_single(&cfg, &cli.out_dir)?;
            print_json(&serde_json::to_value(&outcome)?);
        }
        Command::Pes { dry_run, resume } => {
            let mut cfg = PesConfig::read(require_config(cli)?)?;
            if let Some(s) = cli.seed {
                cfg.run.seed = s;
            }
            if *dry_run {
                let plan = workflow::plan_pes(&cfg)?;
                print_json(&json!({
                    "config_sha256": workflow::config_hash(&cfg),
                    "points": plan,
                }));
                return Ok(ExitCode::SUCCESS);
            }
            let report = workflow::run_pes(&cfg, &cli.out_dir, *resume)?;
            print_json(&json!({
                "csv": cli.out_dir.join(workflow::CSV_FILE),
                "completed": report.rows.len(),
                "failures": report.failures.iter()
                    .map(|f| json!({ "label": f.label, "error": f.error.to_string() }))
                    .collect::<Vec<_>>(),
            }));
            if !report.failures.is_empty() {
                let numerical = report.failures.iter().all(|f| f.error.is_numerical());
                return Ok(ExitCode::from(if numerical { 2 } else { 1 }));
            }
        }
        Command::Extrapolate { log, batch_sizes, weighting } => {
            let points = read_variance_log_file(log)?;
            let selected = select_points(&points, batch_sizes.as_deref())?;
            let fit = fit_zero_variance(&selected, (*weighting).into())?;
            print_json(&json!({ "fit": fit, "points": selected }));
        }
        Command::Oracle { input } => {
            let h = load(input)?;
            let dense = build_dense(&h, h.sector(), DENSE_CAP)?;
            let (energy, _) = dense.ground_state();
            print_json(&json!({
                "energy": energy,
                "dimension": dense.basis.len(),
                "n_alpha": h.n_alpha(),
                "n_beta": h.n_beta(),
                "m": h.m_orbitals(),
            }));
        }
        Command::Hci { input, eps1, max_determinants } => {
            let h = load(input)?;
            let opts = HciOptions {
                eps1_schedule: eps1.clone(),
                max_determinants: *max_determinants,
                ..Default::default()
            };
            let r = hci_ground(&h, h.sector(), &opts)?;
            print_json(&json!({
                "energy": r.result.energy,
                "determinants": r.result.dimension,
                "d_significant": r.result.d_significant,
                "stages": r.stages,
            }));
        }
        Command::Shots(ShotsCommand::Generate { fcidump, ansatz, n_shots, flip_probability, output }) => {
            let h = workflow::load_hamiltonian(fcidump)?;
            let params = LucjParams::read(ansatz)?;
            let state = prepare_lucj(&params, &h)?;
            let noise = NoiseSpec { flip_probability: *flip_probability, seed: cli.seed.unwrap_or(0) };
            let shots = sample(&state, *n_shots, &noise)?;
            std::fs::write(output, write_shots(&shots)).map_err(|e| Error::Io { path: output.clone(), source: e })?;
            let correct = shots.in_sector(h.sector()).count();
            info!("wrote {} shots to {}", shots.len(), output.display());
            print_json(&json!({
                "output": output,
                "shots": shots.len(),
                "correct_particle_number": correct,
            }));
        }
        Command::Shots(ShotsCommand::Inspect { file, m, n_alpha, n_beta, top }) => {
            let shots = read_shots_file(file, *m)?;
            let counts = shots.counts();
            let mut ranked: Vec<_> = counts.iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
            let sector = n_alpha.zip(*n_beta);
            print_json(&json!({
                "m": shots.m,
                "shots": shots.len(),
                "unique": counts.len(),
                "correct_particle_number": sector.map(|s| shots.in_sector(s).count()),
                "top": ranked.iter().take(*top)
                    .map(|(d, c)| json!({ "bits": format_bits(d, shots.m), "count": c }))
                    .collect::<Vec<_>>(),
            }));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
