//! Self-consistent configuration recovery.
//!
//! Shots with the wrong particle number are repaired by flipping bits,
//! guided by the current spin-orbital occupation estimate; the repaired pool
//! is split into `K` random batches, each batch spans a product subspace
//! that is diagonalized, and the batch ground states' occupations become
//! the next estimate. The loop stops when the lowest batch energy settles.

use std::io::Write;

use log::warn;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{CiVector, Determinant};
use crate::hamiltonian::ActiveSpaceHamiltonian;
use crate::sampler::ShotSet;
use crate::solver::{build_subspace, davidson_ground_from, EigResult, SolverOptions};

/// Identifies the bit-flip repair rule in output metadata.
pub const FLIP_RULE: &str =
    "occupation-weighted flips without replacement: surplus weight (x - n)+, deficit weight (n - x)+";

const RECOVERY_CHUNK: usize = 4096;

/// Average spin-orbital occupations, alpha block first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationEstimate {
    pub n_occ: Vec<f64>,
}

impl OccupationEstimate {
    pub fn m_orbitals(&self) -> usize {
        self.n_occ.len() / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_occ.is_empty() || !self.n_occ.len().is_multiple_of(2) || self.n_occ.len() > 128 {
            return Err(Error::domain("occupation vector must have 2M entries, M in 1..=64"));
        }
        if self.n_occ.iter().any(|n| !(0.0..=1.0).contains(n)) {
            return Err(Error::domain("occupations must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Number of batches `K` drawn per step.
    pub k_batches: usize,
    /// Configurations per batch.
    pub batch_size: usize,
    #[serde(default = "RecoveryConfig::default_steps")]
    pub max_steps: usize,
    /// Stop once the lowest batch energy changes by less than this (hartree).
    #[serde(default = "RecoveryConfig::default_tol")]
    pub energy_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

impl RecoveryConfig {
    fn default_steps() -> usize {
        10
    }

    fn default_tol() -> f64 {
        1e-6
    }

    pub fn new(k_batches: usize, batch_size: usize) -> Self {
        Self {
            k_batches,
            batch_size,
            max_steps: Self::default_steps(),
            energy_tol: Self::default_tol(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_batches == 0 {
            return Err(Error::config("k_batches must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be at least 1"));
        }
        if !(self.energy_tol >= 0.0) || !self.energy_tol.is_finite() {
            return Err(Error::config("energy_tol must be a finite nonnegative number"));
        }
        Ok(())
    }
}

/// One recovery iteration, as written to the JSONL log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// `None` marks a batch whose diagonalization failed.
    pub batch_energies: Vec<Option<f64>>,
    pub dimensions: Vec<usize>,
    pub min_energy: f64,
    pub occupations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Lowest batch energy of the final step.
    pub energy: f64,
    pub per_step_energies: Vec<f64>,
    pub final_occ: OccupationEstimate,
    /// Lowest-energy batch over all steps.
    pub best_batch: EigResult,
    pub steps: Vec<StepRecord>,
    pub converged: bool,
}

/// Mean occupation over the shots that already carry the target particle
/// numbers.
pub fn initial_occupations(shots: &ShotSet, sector: (usize, usize)) -> Result<OccupationEstimate> {
    let m = shots.m;
    let mut sum = vec![0u64; 2 * m];
    let mut count = 0u64;
    for d in shots.in_sector(sector) {
        count += 1;
        for p in 0..m {
            sum[p] += d.alpha >> p & 1;
            sum[m + p] += d.beta >> p & 1;
        }
    }
    if count == 0 {
        return Err(Error::NoValidShots {
            n_alpha: sector.0 as u32,
            n_beta: sector.1 as u32,
        });
    }
    Ok(OccupationEstimate {
        n_occ: sum.iter().map(|&s| s as f64 / count as f64).collect(),
    })
}

/// Brings the popcount of `s` to `target` by flipping bits drawn without
/// replacement with weight `1 - n_p` (surplus, occupied bits) or `n_p`
/// (deficit, empty bits). Candidates all weighing zero fall back to uniform.
fn repair_string<R: Rng + ?Sized>(s: u64, occ: &[f64], target: usize, rng: &mut R) -> u64 {
    let m = occ.len();
    let have = s.count_ones() as usize;
    if have == target {
        return s;
    }
    let surplus = have > target;
    let mut candidates: Vec<(usize, f64)> = (0..m)
        .filter(|&p| (s >> p & 1 == 1) == surplus)
        .map(|p| (p, if surplus { 1.0 - occ[p] } else { occ[p] }.max(0.0)))
        .collect();
    let mut out = s;
    for _ in 0..have.abs_diff(target) {
        let total: f64 = candidates.iter().map(|c| c.1).sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = candidates.len() - 1;
            for (i, c) in candidates.iter().enumerate() {
                if u < c.1 {
                    chosen = i;
                    break;
                }
                u -= c.1;
            }
            // guard against rounding landing on a zero-weight tail entry
            while candidates[chosen].1 == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.random_range(0..candidates.len())
        };
        let (p, _) = candidates.swap_remove(pick);
        out ^= 1u64 << p;
    }
    out
}

/// Repairs the particle numbers of one raw shot. Spin sectors that are
/// already correct are returned unchanged.
pub fn recover_configuration<R: Rng + ?Sized>(
    x: &Determinant,
    occ: &OccupationEstimate,
    sector: (usize, usize),
    rng: &mut R,
) -> Determinant {
    let m = occ.m_orbitals();
    Determinant::new(
        repair_string(x.alpha, &occ.n_occ[..m], sector.0, rng),
        repair_string(x.beta, &occ.n_occ[m..], sector.1, rng),
    )
}

/// Independent stream for `(seed, step, lane)`, so results do not depend on
/// how work is scheduled across threads.
fn stream(seed: u64, step: usize, lane: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(step as u64).to_le_bytes());
    key[16..24].copy_from_slice(&lane.to_le_bytes());
    key[24..].copy_from_slice(b"recovery");
    ChaCha8Rng::from_seed(key)
}

const BATCH_LANE: u64 = u64::MAX;

/// Repairs every shot of the pool for one step.
pub fn recover_all(
    shots: &ShotSet,
    occ: &OccupationEstimate,
    sector: (usize, usize),
    seed: u64,
    step: usize,
) -> Vec<Determinant> {
    shots
        .shots
        .par_chunks(RECOVERY_CHUNK)
        .enumerate()
        .flat_map_iter(|(c, chunk)| {
            let mut rng = stream(seed, step, c as u64);
            chunk
                .iter()
                .map(|x| recover_configuration(x, occ, sector, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Full recovery loop. `log`, when given, receives one JSON line per step.
pub fn run_recovery(
    h: &ActiveSpaceHamiltonian,
    shots: &ShotSet,
    cfg: &RecoveryConfig,
    opts: &SolverOptions,
    mut log: Option<&mut dyn Write>,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let sector = h.sector();
    if shots.m != h.m_orbitals() {
        return Err(Error::domain(format!(
            "shots span {} orbitals, Hamiltonian has {}",
            shots.m,
            h.m_orbitals()
        )));
    }
    if shots.is_empty() {
        return Err(Error::domain("no shots to recover"));
    }
    if cfg.batch_size > shots.len() {
        return Err(Error::config(format!(
            "batch_size {} exceeds the {} available shots",
            cfg.batch_size,
            shots.len()
        )));
    }
    let mut occ = initial_occupations(shots, sector)?;
    let mut previous: Vec<Option<CiVector>> = vec![None; cfg.k_batches];
    let mut best: Option<EigResult> = None;
    let mut steps = Vec::new();
    let mut per_step = Vec::new();
    let mut converged = false;

    for step in 0..cfg.max_steps {
        let pool = recover_all(shots, &occ, sector, cfg.seed, step);
        let mut rng = stream(cfg.seed, step, BATCH_LANE);
        let batches: Vec<Vec<Determinant>> = (0..cfg.k_batches)
            .map(|_| {
                index::sample(&mut rng, pool.len(), cfg.batch_size)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect()
            })
            .collect();

        let outcomes: Vec<(usize, Result<EigResult>)> = batches
            .par_iter()
            .zip(previous.par_iter())
            .map(|(batch, prev)| {
                let s = build_subspace(h.m_orbitals(), batch)?;
                let d = s.dimension();
                Ok((d, davidson_ground_from(h, &s, opts, prev.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut energies = Vec::with_capacity(cfg.k_batches);
        let mut dimensions = Vec::with_capacity(cfg.k_batches);
        let mut successes: Vec<EigResult> = Vec::new();
        for (b, (d, outcome)) in outcomes.into_iter().enumerate() {
            dimensions.push(d);
            match outcome {
                Ok(r) => {
                    energies.push(Some(r.energy));
                    previous[b] = Some(r.state.clone());
                    successes.push(r);
                }
                Err(e) => {
                    warn!("recovery step {step}, batch {b}: {e}; batch skipped");
                    energies.push(None);
                }
            }
        }
        if successes.is_empty() {
            return Err(Error::AllBatchesFailed { step });
        }

        let mut n_occ = vec![0.0; 2 * h.m_orbitals()];
        for r in &successes {
            for (acc, n) in n_occ.iter_mut().zip(&r.occupations) {
                *acc += n;
            }
        }
        let k = successes.len() as f64;
        n_occ.iter_mut().for_each(|n| *n = (*n / k).clamp(0.0, 1.0));
        occ = OccupationEstimate { n_occ };

        let step_best = successes
            .into_iter()
            .min_by(|a, b| a.energy.total_cmp(&b.energy))
            .expect("nonempty");
        let e = step_best.energy;
        if best.as_ref().is_none_or(|b| e < b.energy) {
            best = Some(step_best);
        }
        let record = StepRecord {
            step,
            batch_energies: energies,
            dimensions,
            min_energy: e,
            occupations: occ.n_occ.clone(),
        };
        if let Some(w) = log.as_deref_mut() {
            serde_json::to_writer(&mut *w, &record)?;
            writeln!(w).map_err(|err| Error::io("recovery log", err))?;
        }
        steps.push(record);
        let settled = per_step.last().is_some_and(|&last: &f64| (e - last).abs() < cfg.energy_tol);
        per_step.push(e);
        if settled {
            converged = true;
            break;
        }
    }

    Ok(RecoveryResult {
        energy: *per_step.last().expect("at least one step"),
        per_step_energies: per_step,
        final_occ: occ,
        best_batch: best.expect("at least one step"),
        steps,
        converged,
    })
}
