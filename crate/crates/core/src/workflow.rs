//! Run orchestration: single-point runs, potential-energy-surface scans with
//! a shared unbound reference, binding energies, provenance and resumable
//! output.
//!
//! Configuration is JSON. Relative paths inside a config file resolve
//! against the directory that contains it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::ansatz::{prepare_lucj, LucjParams};
use crate::error::{Error, Result};
use crate::extrapolate::{fit_zero_variance, FitResult, VariancePoint, Weighting};
use crate::fock::{binomial, build_dense, CiVector, DENSE_CAP};
use crate::hamiltonian::{read_fcidump, ActiveSpaceHamiltonian};
use crate::recovery::{run_recovery, RecoveryConfig, RecoveryResult, StepRecord, FLIP_RULE};
use crate::sampler::{read_shots_file, sample, NoiseSpec, ShotSet, MAX_SHOTS};
use crate::solver::{hci_ground, variance, EigResult, HciOptions, SolverOptions};
use crate::HARTREE_TO_KCAL_MOL;

/// Supramolecular binding energy `E_bound - E_unbound` in kcal/mol.
pub fn binding_energy(bound: f64, unbound: f64) -> f64 {
    (bound - unbound) * HARTREE_TO_KCAL_MOL
}

/// Binding energy from separate runs on the complex and both monomers,
/// `E_AB - E_A - E_B`, in kcal/mol.
pub fn binding_energy_three_run(complex: f64, monomer_a: f64, monomer_b: f64) -> f64 {
    (complex - monomer_a - monomer_b) * HARTREE_TO_KCAL_MOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveSpace {
    pub m: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
}

impl ActiveSpace {
    /// Size of the full alpha x beta product space.
    pub fn d_max(&self) -> usize {
        binomial(self.m, self.n_alpha) * binomial(self.m, self.n_beta)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Sqd,
    Hci,
    CasciOracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sqd => "sqd",
            Method::Hci => "hci",
            Method::CasciOracle => "casci_oracle",
        }
    }
}

fn default_n_shots() -> usize {
    100_000
}

/// One calculation on one Hamiltonian. The run `seed` drives both the
/// sampler and recovery; seeds nested in `noise` or `recovery` are
/// overwritten by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub fcidump: Option<PathBuf>,
    /// Expected sector; checked against the FCIDUMP and used for dry runs.
    #[serde(default)]
    pub active_space: Option<ActiveSpace>,
    #[serde(default)]
    pub method: Method,
    /// LUCJ parameter file to sample from.
    #[serde(default)]
    pub ansatz: Option<PathBuf>,
    /// Pre-recorded shot file (alternative to `ansatz`).
    #[serde(default)]
    pub shots: Option<PathBuf>,
    #[serde(default = "default_n_shots")]
    pub n_shots: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub recovery: Option<RecoveryConfig>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub hci: HciOptions,
    /// Batch sizes for zero-variance extrapolation; when nonempty, each
    /// size replaces `recovery.batch_size` in its own recovery run.
    #[serde(default)]
    pub extrapolation: Vec<usize>,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not need the Hamiltonian.
    pub fn validate(&self) -> Result<()> {
        self.noise.validate().map_err(|e| Error::config(e.to_string()))?;
        if let Some(a) = &self.active_space {
            if a.m == 0 || a.m > 64 || a.n_alpha > a.m || a.n_beta > a.m {
                return Err(Error::config(format!(
                    "active space ({} alpha, {} beta, {} orbitals) is invalid",
                    a.n_alpha, a.n_beta, a.m
                )));
            }
        }
        if self.method != Method::Sqd {
            return Ok(());
        }
        match (&self.ansatz, &self.shots) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::config("give exactly one of \"ansatz\" and \"shots\"")),
        }
        let rec = self
            .recovery
            .as_ref()
            .ok_or_else(|| Error::config("method sqd needs a \"recovery\" section"))?;
        rec.validate()?;
        if self.ansatz.is_some() {
            if self.n_shots == 0 || self.n_shots > MAX_SHOTS {
                return Err(Error::config(format!("n_shots must be in 1..={MAX_SHOTS}")));
            }
            for &b in self.batch_sizes().iter() {
                if b > self.n_shots {
                    return Err(Error::config(format!(
                        "batch size {b} exceeds n_shots {}",
                        self.n_shots
                    )));
                }
            }
        }
        if !self.extrapolation.is_empty() {
            let distinct: BTreeSet<_> = self.extrapolation.iter().collect();
            if distinct.len() < 2 || distinct.len() != self.extrapolation.len() {
                return Err(Error::config("extrapolation needs at least two distinct batch sizes"));
            }
            if self.extrapolation.contains(&0) {
                return Err(Error::config("extrapolation batch sizes must be positive"));
            }
        }
        Ok(())
    }

    /// Batch sizes that will actually be run.
    pub fn batch_sizes(&self) -> Vec<usize> {
        if !self.extrapolation.is_empty() {
            let mut v = self.extrapolation.clone();
            v.sort_unstable();
            v
        } else {
            self.recovery.iter().map(|r| r.batch_size).collect()
        }
    }

    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.fcidump, &mut self.ansatz, &mut self.shots].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Result of one run, as stored in manifests and summarized in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    pub label: String,
    pub method: Method,
    /// Variational energy, or the extrapolated intercept (hartree).
    pub energy: f64,
    pub variance: Option<f64>,
    pub d: usize,
    pub d_significant: usize,
    /// Intercept standard error when extrapolated (hartree).
    pub stderr: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub fit: Option<FitResult>,
    #[serde(default)]
    pub per_step_energies: Vec<f64>,
}

/// Log sinks for one run.
#[derive(Debug, Default)]
pub struct RunLogs {
    /// One JSON line per recovery step.
    pub recovery: Vec<u8>,
    /// One [`VariancePoint`] per batch size, readable by the extrapolator.
    pub variance: Vec<u8>,
}

#[derive(Serialize)]
struct LoggedStep<'a> {
    batch_size: usize,
    #[serde(flatten)]
    step: &'a StepRecord,
}

fn check_sector(h: &ActiveSpaceHamiltonian, cfg: &RunConfig) -> Result<()> {
    if let Some(a) = &cfg.active_space {
        let got = (h.m_orbitals(), h.n_alpha(), h.n_beta());
        if got != (a.m, a.n_alpha, a.n_beta) {
            return Err(Error::config(format!(
                "Hamiltonian has (M, n_alpha, n_beta) = {got:?}, config expects ({}, {}, {})",
                a.m, a.n_alpha, a.n_beta
            )));
        }
    }
    Ok(())
}

fn acquire_shots(h: &ActiveSpaceHamiltonian, cfg: &RunConfig) -> Result<ShotSet> {
    if let Some(path) = &cfg.shots {
        return read_shots_file(path, Some(h.m_orbitals()));
    }
    let path = cfg.ansatz.as_ref().ok_or_else(|| Error::config("no shot source"))?;
    let params = LucjParams::read(path)?;
    let state = prepare_lucj(&params, h)?;
    let noise = NoiseSpec { seed: cfg.seed, ..cfg.noise };
    sample(&state, cfg.n_shots, &noise)
}

fn variance_of(h: &ActiveSpaceHamiltonian, r: &EigResult) -> f64 {
    r.variance.unwrap_or_else(|| variance(h, &r.state))
}

/// Runs the configured method on `h`.
pub fn run_point(h: &ActiveSpaceHamiltonian, cfg: &RunConfig, logs: &mut RunLogs) -> Result<PointOutcome> {
    cfg.validate()?;
    check_sector(h, cfg)?;
    let label = cfg.label.clone().unwrap_or_default();
    let base = PointOutcome {
        label,
        method: cfg.method,
        energy: f64::NAN,
        variance: None,
        d: 0,
        d_significant: 0,
        stderr: None,
        seed: cfg.seed,
        fit: None,
        per_step_energies: Vec::new(),
    };
    match cfg.method {
        Method::CasciOracle => {
            let dense = build_dense(h, h.sector(), DENSE_CAP)?;
            let (energy, state) = dense.ground_state();
            let d_significant = significant(&state, cfg.solver.significance_threshold);
            Ok(PointOutcome {
                energy,
                variance: cfg.solver.compute_variance.then(|| variance(h, &state)),
                d: state.len(),
                d_significant,
                ..base
            })
        }
        Method::Hci => {
            let r = hci_ground(h, h.sector(), &cfg.hci)?;
            Ok(PointOutcome {
                energy: r.result.energy,
                variance: cfg.solver.compute_variance.then(|| variance_of(h, &r.result)),
                d: r.result.dimension,
                d_significant: r.result.d_significant,
                per_step_energies: r.stages.iter().map(|s| s.energy).collect(),
                ..base
            })
        }
        Method::Sqd => run_sqd(h, cfg, logs, base),
    }
}

fn significant(state: &CiVector, threshold: f64) -> usize {
    state.coeffs().iter().filter(|c| *c * *c > threshold).count()
}

fn run_sqd(
    h: &ActiveSpaceHamiltonian,
    cfg: &RunConfig,
    logs: &mut RunLogs,
    base: PointOutcome,
) -> Result<PointOutcome> {
    let shots = acquire_shots(h, cfg)?;
    let template = cfg.recovery.clone().expect("validated");
    let sizes = cfg.batch_sizes();
    let mut runs: Vec<(usize, RecoveryResult)> = Vec::with_capacity(sizes.len());
    for &b in &sizes {
        let rc = RecoveryConfig { batch_size: b, seed: cfg.seed, ..template.clone() };
        let r = run_recovery(h, &shots, &rc, &cfg.solver, None)?;
        for step in &r.steps {
            serde_json::to_writer(&mut logs.recovery, &LoggedStep { batch_size: b, step })?;
            logs.recovery.push(b'\n');
        }
        info!(
            "batch size {b}: E = {:.10} after {} steps (d = {})",
            r.best_batch.energy,
            r.steps.len(),
            r.best_batch.dimension
        );
        runs.push((b, r));
    }

    let want_variance = cfg.solver.compute_variance || !cfg.extrapolation.is_empty();
    let mut points = Vec::with_capacity(runs.len());
    let mut last_variance = None;
    if want_variance {
        for (b, r) in &runs {
            let v = variance_of(h, &r.best_batch);
            last_variance = Some(v);
            let p = VariancePoint::new(r.best_batch.energy, v, *b);
            serde_json::to_writer(&mut logs.variance, &p)?;
            logs.variance.push(b'\n');
            points.push(p);
        }
    }

    let (_, last) = runs.last().expect("at least one batch size");
    let best = &last.best_batch;
    let mut out = PointOutcome {
        energy: best.energy,
        variance: last_variance,
        d: best.dimension,
        d_significant: best.d_significant,
        per_step_energies: last.per_step_energies.clone(),
        ..base
    };
    if !cfg.extrapolation.is_empty() {
        let fit = fit_zero_variance(&points, cfg.weighting)?;
        if fit.dof_warning {
            warn!("two-point extrapolation: no residual degrees of freedom, stderr reported as 0");
        }
        out.energy = fit.intercept;
        out.stderr = Some(fit.intercept_stderr);
        out.fit = Some(fit);
    }
    Ok(out)
}

/// Loads the Hamiltonian named by a run config.
pub fn load_hamiltonian(path: &Path) -> Result<ActiveSpaceHamiltonian> {
    let f = read_fcidump(path)?;
    if f.core_energy_missing {
        warn!("{}: no core-energy line; E_core taken as 0", path.display());
    }
    Ok(f.hamiltonian)
}

// ---------------------------------------------------------------------------
// PES scans

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PesPointConfig {
    pub label: String,
    pub fcidump: PathBuf,
    /// Marks the reference every binding energy is measured against.
    #[serde(default)]
    pub unbound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PesConfig {
    #[serde(default)]
    pub description: Option<String>,
    /// Settings shared by every point.
    pub run: RunConfig,
    pub points: Vec<PesPointConfig>,
}

impl PesConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PesConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.run.resolve(base);
        for p in &mut cfg.points {
            if p.fcidump.is_relative() {
                p.fcidump = base.join(&p.fcidump);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.run.fcidump.is_some() || self.run.label.is_some() {
            return Err(Error::config("the shared \"run\" section must not set fcidump or label"));
        }
        if self.points.is_empty() {
            return Err(Error::config("no PES points"));
        }
        let labels: BTreeSet<_> = self.points.iter().map(|p| &p.label).collect();
        if labels.len() != self.points.len() {
            return Err(Error::config("PES point labels must be unique"));
        }
        match self.points.iter().filter(|p| p.unbound).count() {
            1 => Ok(()),
            0 => Err(Error::config("no point is flagged as the unbound reference")),
            _ => Err(Error::config("more than one point is flagged as unbound")),
        }
    }

    /// Per-point run configs.
    pub fn point_runs(&self) -> Vec<RunConfig> {
        self.points
            .iter()
            .map(|p| RunConfig {
                label: Some(p.label.clone()),
                fcidump: Some(p.fcidump.clone()),
                ..self.run.clone()
            })
            .collect()
    }
}

/// Reads a run config file and resolves its relative paths.
pub fn read_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = RunConfig::from_json(&text)?;
    cfg.resolve(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

/// Hex SHA-256 of the config's canonical JSON form.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let canonical = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub label: String,
    pub method: Method,
    pub fcidump: PathBuf,
    pub unbound: bool,
    pub electrons: usize,
    pub m: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    /// Dimension of the full alpha x beta product space.
    pub d_max: usize,
    pub n_shots: Option<usize>,
    pub k_batches: Option<usize>,
    pub batch_sizes: Vec<usize>,
    pub max_steps: Option<usize>,
}

/// Validates a scan and describes it without computing anything. The
/// sector comes from `active_space` when given, otherwise from each FCIDUMP.
pub fn plan_pes(cfg: &PesConfig) -> Result<Vec<PlanEntry>> {
    cfg.validate()?;
    cfg.points
        .iter()
        .map(|p| {
            let a = match cfg.run.active_space {
                Some(a) => a,
                None => {
                    let h = load_hamiltonian(&p.fcidump)?;
                    ActiveSpace { m: h.m_orbitals(), n_alpha: h.n_alpha(), n_beta: h.n_beta() }
                }
            };
            let sqd = cfg.run.method == Method::Sqd;
            let rec = cfg.run.recovery.as_ref().filter(|_| sqd);
            Ok(PlanEntry {
                label: p.label.clone(),
                method: cfg.run.method,
                fcidump: p.fcidump.clone(),
                unbound: p.unbound,
                electrons: a.n_alpha + a.n_beta,
                m: a.m,
                n_alpha: a.n_alpha,
                n_beta: a.n_beta,
                d_max: a.d_max(),
                n_shots: (sqd && cfg.run.ansatz.is_some()).then_some(cfg.run.n_shots),
                k_batches: rec.map(|r| r.k_batches),
                batch_sizes: if sqd { cfg.run.batch_sizes() } else { Vec::new() },
                max_steps: rec.map(|r| r.max_steps),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PesRow {
    pub outcome: PointOutcome,
    pub unbound: bool,
    pub binding_kcal_mol: Option<f64>,
    pub stderr_kcal_mol: Option<f64>,
}

#[derive(Debug)]
pub struct PesFailure {
    pub label: String,
    pub error: Error,
}

#[derive(Debug)]
pub struct PesReport {
    /// Completed points in config order.
    pub rows: Vec<PesRow>,
    pub failures: Vec<PesFailure>,
    pub config_hash: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    config_sha256: String,
    completed: BTreeMap<String, PointOutcome>,
}

pub const CSV_FILE: &str = "pes.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PROVENANCE_FILE: &str = "provenance.json";

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn point_dir(out_dir: &Path, label: &str) -> PathBuf {
    let safe: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    out_dir.join("points").join(safe)
}

/// Binding energies against the unbound row.
pub fn resolve_bindings(rows: &mut [PesRow]) {
    let reference = rows.iter().find(|r| r.unbound).map(|r| (r.outcome.energy, r.outcome.stderr));
    for row in rows.iter_mut() {
        let Some((e_ref, s_ref)) = reference else {
            row.binding_kcal_mol = None;
            row.stderr_kcal_mol = None;
            continue;
        };
        row.binding_kcal_mol = Some(binding_energy(row.outcome.energy, e_ref));
        row.stderr_kcal_mol = match (row.outcome.stderr, s_ref) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0.0).hypot(b.unwrap_or(0.0)) * HARTREE_TO_KCAL_MOL),
        };
    }
}

/// CSV with columns `label, method, energy_hartree, variance, d,
/// d_significant, binding_kcal_mol, stderr_kcal_mol, seed`; absent values
/// are empty fields.
pub fn pes_csv(rows: &[PesRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // shortest round-trip form, with an exponent for very small or large values
    let num = |x: f64| format!("{x:?}");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let io = |e: csv::Error| Error::io(CSV_FILE, std::io::Error::other(e));
    w.write_record([
        "label",
        "method",
        "energy_hartree",
        "variance",
        "d",
        "d_significant",
        "binding_kcal_mol",
        "stderr_kcal_mol",
        "seed",
    ])
    .map_err(io)?;
    for r in rows {
        let o = &r.outcome;
        w.write_record([
            o.label.clone(),
            o.method.as_str().to_string(),
            num(o.energy),
            opt(o.variance),
            o.d.to_string(),
            o.d_significant.to_string(),
            opt(r.binding_kcal_mol),
            opt(r.stderr_kcal_mol),
            o.seed.to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::io(CSV_FILE, std::io::Error::other(e.to_string())))
}

fn provenance(cfg: &PesConfig, hash: &str, failures: &[PesFailure]) -> serde_json::Value {
    json!({
        "tool": "sqd",
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": hash,
        "seed": cfg.run.seed,
        "method": cfg.run.method,
        "points": cfg.points.iter().map(|p| &p.label).collect::<Vec<_>>(),
        "unbound_reference": cfg.points.iter().find(|p| p.unbound).map(|p| &p.label),
        "parameters": {
            "n_shots": cfg.run.n_shots,
            "noise_flip_probability": cfg.run.noise.flip_probability,
            "recovery": cfg.run.recovery,
            "extrapolation_batch_sizes": cfg.run.extrapolation,
        },
        "recovery_flip_rule": FLIP_RULE,
        "batch_composition": "uniform sampling without replacement within a batch; batches drawn independently",
        "extrapolation": {
            "abscissa": "variance / energy^2",
            "weighting": cfg.run.weighting,
            "error_estimate": "standard error of the least-squares intercept",
            "energy_per_batch_size": "lowest batch energy over all recovery steps",
        },
        "hartree_to_kcal_mol": HARTREE_TO_KCAL_MOL,
        "failures": failures
            .iter()
            .map(|f| json!({ "label": f.label, "error": f.error.to_string() }))
            .collect::<Vec<_>>(),
    })
}

/// Runs every point (in parallel on the current rayon pool), resolves
/// bindings against the unbound reference, and writes `pes.csv`,
/// `provenance.json`, `manifest.json` and per-point logs under `out_dir`.
/// With `resume`, points recorded in an existing manifest for the same
/// config are not recomputed. Point failures are reported, not fatal.
pub fn run_pes(cfg: &PesConfig, out_dir: &Path, resume: bool) -> Result<PesReport> {
    cfg.validate()?;
    let hash = config_hash(cfg);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let manifest = if resume && manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.config_sha256 != hash {
            return Err(Error::config(format!(
                "{} belongs to a different configuration",
                manifest_path.display()
            )));
        }
        info!("resuming: {} point(s) already complete", m.completed.len());
        m
    } else {
        Manifest { config_sha256: hash.clone(), ..Default::default() }
    };
    let done = manifest.completed.clone();
    let manifest = Mutex::new(manifest);

    let runs = cfg.point_runs();
    let results: Vec<Result<PointOutcome>> = runs
        .par_iter()
        .map(|run| {
            let label = run.label.clone().expect("point label");
            if let Some(o) = done.get(&label) {
                return Ok(o.clone());
            }
            let h = load_hamiltonian(run.fcidump.as_ref().expect("point fcidump"))?;
            let mut logs = RunLogs::default();
            let outcome = run_point(&h, run, &mut logs)?;
            let dir = point_dir(out_dir, &label);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_file(&dir.join("recovery.jsonl"), &logs.recovery)?;
            write_file(&dir.join("variance.jsonl"), &logs.variance)?;
            let mut m = manifest.lock().expect("manifest lock");
            m.completed.insert(label, outcome.clone());
            write_file(&manifest_path, &serde_json::to_vec_pretty(&*m)?)?;
            Ok(outcome)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for ((p, run), r) in cfg.points.iter().zip(&runs).zip(results) {
        match r {
            Ok(outcome) => rows.push(PesRow {
                outcome,
                unbound: p.unbound,
                binding_kcal_mol: None,
                stderr_kcal_mol: None,
            }),
            Err(error) => {
                warn!("point {}: {error}", run.label.as_deref().unwrap_or(""));
                failures.push(PesFailure { label: p.label.clone(), error });
            }
        }
    }
    resolve_bindings(&mut rows);
    write_file(&out_dir.join(CSV_FILE), &pes_csv(&rows)?)?;
    let mut prov = serde_json::to_vec_pretty(&provenance(cfg, &hash, &failures))?;
    prov.push(b'\n');
    write_file(&out_dir.join(PROVENANCE_FILE), &prov)?;
    // the manifest is rewritten after the scan so its bytes do not depend
    // on the order in which parallel points finished
    let m = manifest.into_inner().expect("manifest lock");
    write_file(&manifest_path, &serde_json::to_vec_pretty(&m)?)?;
    Ok(PesReport { rows, failures, config_hash: hash })
}

/// Single run with outputs (`result.json`, logs, provenance) in `out_dir`.
pub fn run_single(cfg: &RunConfig, out_dir: &Path) -> Result<PointOutcome> {
    cfg.validate()?;
    let path = cfg
        .fcidump
        .as_ref()
        .ok_or_else(|| Error::config("run config needs \"fcidump\""))?;
    let h = load_hamiltonian(path)?;
    let mut logs = RunLogs::default();
    let outcome = run_point(&h, cfg, &mut logs)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(&out_dir.join("recovery.jsonl"), &logs.recovery)?;
    write_file(&out_dir.join("variance.jsonl"), &logs.variance)?;
    let mut result = serde_json::to_vec_pretty(&outcome)?;
    result.push(b'\n');
    write_file(&out_dir.join("result.json"), &result)?;
    let prov = json!({
        "tool": "sqd",
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "method": cfg.method,
        "recovery_flip_rule": FLIP_RULE,
        "recovery": cfg.recovery,
        "n_shots": cfg.n_shots,
        "hartree_to_kcal_mol": HARTREE_TO_KCAL_MOL,
    });
    let mut f = fs::File::create(out_dir.join(PROVENANCE_FILE))
        .map_err(|e| Error::io(out_dir.join(PROVENANCE_FILE), e))?;
    serde_json::to_writer_pretty(&mut f, &prov)?;
    writeln!(f).map_err(|e| Error::io(out_dir.join(PROVENANCE_FILE), e))?;
    Ok(outcome)
}
