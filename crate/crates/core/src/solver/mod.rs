//! Subspace construction, Davidson ground states, Hamiltonian variance and
//! a heat-bath (HCI-style) selected-CI baseline.

mod davidson;
mod operator;
mod subspace;

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{diagonal_energy, for_each_connected, CiVector, Determinant};
use crate::hamiltonian::ActiveSpaceHamiltonian;

pub use davidson::{lowest_eigenpair, DavidsonOutcome, DavidsonParams};
pub use operator::{
    DeterminantListHamiltonian, LinearOperator, MatvecMode, ProductSpaceHamiltonian,
};
pub use subspace::{build_subspace, Subspace};

/// Coefficient weight `c^2` above which a configuration counts toward `d'`.
pub const SIGNIFICANCE_THRESHOLD: f64 = 1.0e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Residual norm at which Davidson stops.
    pub tolerance: f64,
    /// Davidson subspace size before restart.
    pub max_space: usize,
    pub matvec: MatvecMode,
    /// Largest dimension stored as an explicit sparse matrix in `auto` mode.
    pub sparse_threshold: usize,
    /// Also evaluate the Hamiltonian variance of each solution.
    pub compute_variance: bool,
    pub significance_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            tolerance: 1e-8,
            max_space: 20,
            matvec: MatvecMode::Auto,
            sparse_threshold: 50_000,
            compute_variance: false,
            significance_threshold: SIGNIFICANCE_THRESHOLD,
        }
    }
}

impl SolverOptions {
    fn davidson(&self) -> DavidsonParams {
        DavidsonParams {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            max_space: self.max_space,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigResult {
    pub energy: f64,
    pub state: CiVector,
    /// `<n_p sigma>`, alpha block first.
    pub occupations: Vec<f64>,
    /// `<H^2> - <H>^2`, when requested.
    pub variance: Option<f64>,
    /// Configurations with `c^2` above the significance threshold.
    pub d_significant: usize,
    pub dimension: usize,
    pub residual: f64,
    pub iterations: usize,
}

fn finish(
    h: &ActiveSpaceHamiltonian,
    basis: Vec<Determinant>,
    outcome: DavidsonOutcome,
    opts: &SolverOptions,
) -> Result<EigResult> {
    let mut coeffs = outcome.vector;
    // sign convention: largest-magnitude coefficient positive
    let big = coeffs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if coeffs[big] < 0.0 {
        coeffs.iter_mut().for_each(|c| *c = -*c);
    }
    let dimension = basis.len();
    let mut state = CiVector::new(basis, coeffs)?;
    state.normalize();
    let occupations = state.occupations(h.m_orbitals());
    let d_significant = state
        .coeffs()
        .iter()
        .filter(|c| *c * *c > opts.significance_threshold)
        .count();
    let variance = opts.compute_variance.then(|| variance(h, &state));
    Ok(EigResult {
        energy: outcome.value,
        state,
        occupations,
        variance,
        d_significant,
        dimension,
        residual: outcome.residual,
        iterations: outcome.iterations,
    })
}

/// Projects a previous state onto the subspace basis as a warm start.
fn project_guess(guess: Option<&CiVector>, basis_index: impl Fn(&Determinant) -> Option<usize>, n: usize) -> Option<Vec<f64>> {
    let g = guess?;
    let mut x = vec![0.0; n];
    let mut w = 0.0;
    for (d, c) in g.basis().iter().zip(g.coeffs()) {
        if let Some(i) = basis_index(d) {
            x[i] = *c;
            w += c * c;
        }
    }
    // a guess with little weight in the new space is worse than the default
    (w > 0.5).then_some(x)
}

/// Ground state of `H` projected onto a product subspace.
pub fn davidson_ground(
    h: &ActiveSpaceHamiltonian,
    s: &Subspace,
    opts: &SolverOptions,
) -> Result<EigResult> {
    davidson_ground_from(h, s, opts, None)
}

/// [`davidson_ground`] warm-started from a previous state where it overlaps.
pub fn davidson_ground_from(
    h: &ActiveSpaceHamiltonian,
    s: &Subspace,
    opts: &SolverOptions,
    guess: Option<&CiVector>,
) -> Result<EigResult> {
    if s.m_orbitals() != h.m_orbitals() {
        return Err(Error::domain("subspace and Hamiltonian orbital counts differ"));
    }
    let op = ProductSpaceHamiltonian::new(h, s, opts.matvec, opts.sparse_threshold);
    let x0 = project_guess(guess, |d| s.index_of(d), s.dimension());
    let outcome = lowest_eigenpair(&op, &opts.davidson(), x0)?;
    finish(h, s.basis(), outcome, opts)
}

/// Ground state over an explicit determinant list.
pub fn davidson_ground_list(
    h: &ActiveSpaceHamiltonian,
    basis: Vec<Determinant>,
    opts: &SolverOptions,
    guess: Option<&CiVector>,
) -> Result<EigResult> {
    if basis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("determinant list must be sorted and unique"));
    }
    let op = DeterminantListHamiltonian::new(h, &basis);
    let x0 = project_guess(guess, |d| basis.binary_search(d).ok(), basis.len());
    let outcome = lowest_eigenpair(&op, &opts.davidson(), x0)?;
    finish(h, basis, outcome, opts)
}

/// `||H psi||^2 - <psi|H|psi>^2`, with `H psi` carried into every connected
/// determinant, inside or outside the state's basis. Values in `[-1e-12, 0)`
/// are reported as 0.
pub fn variance(h: &ActiveSpaceHamiltonian, state: &CiVector) -> f64 {
    let basis = state.basis();
    let coeffs = state.coeffs();
    let norm2: f64 = coeffs.iter().map(|c| c * c).sum();
    if norm2 == 0.0 {
        return 0.0;
    }
    // fixed chunking keeps the floating-point summation order independent of
    // the thread count
    const CHUNKS: usize = 64;
    let chunk = basis.len().div_ceil(CHUNKS).max(1);
    let partial: Vec<HashMap<Determinant, f64>> = basis
        .par_chunks(chunk)
        .zip(coeffs.par_chunks(chunk))
        .map(|(ds, cs)| {
            let mut w: HashMap<Determinant, f64> = HashMap::new();
            for (d, &c) in ds.iter().zip(cs) {
                if c == 0.0 {
                    continue;
                }
                *w.entry(*d).or_insert(0.0) += diagonal_energy(h, d) * c;
                for_each_connected(h, d, |dp, v| {
                    if v != 0.0 {
                        *w.entry(dp).or_insert(0.0) += v * c;
                    }
                });
            }
            w
        })
        .collect();
    let mut total: HashMap<Determinant, f64> = HashMap::new();
    for part in partial {
        for (d, v) in part {
            *total.entry(d).or_insert(0.0) += v;
        }
    }
    let mut entries: Vec<(Determinant, f64)> = total.into_iter().collect();
    entries.sort_unstable_by_key(|e| e.0);
    let mut h2 = 0.0;
    let mut e = 0.0;
    for (d, w) in &entries {
        h2 += w * w;
        if let Ok(i) = basis.binary_search(d) {
            e += coeffs[i] * w;
        }
    }
    let (h2, e) = (h2 / norm2, e / norm2);
    let var = h2 - e * e;
    if (-1e-12..0.0).contains(&var) {
        0.0
    } else {
        var
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HciOptions {
    /// Selection thresholds, nonincreasing.
    pub eps1_schedule: Vec<f64>,
    pub max_determinants: usize,
    /// Selection rounds allowed per threshold before giving up on stability.
    pub max_rounds: usize,
    pub solver: SolverOptions,
}

impl Default for HciOptions {
    fn default() -> Self {
        Self {
            eps1_schedule: vec![5e-6, 1e-6],
            max_determinants: 2_000_000,
            max_rounds: 100,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HciStage {
    pub eps1: f64,
    pub energy: f64,
    pub determinants: usize,
    pub rounds: usize,
}

#[derive(Debug, Clone)]
pub struct HciResult {
    pub result: EigResult,
    pub stages: Vec<HciStage>,
}

/// Variational heat-bath selection from the aufbau determinant: add every
/// connected `d'` with `max_i |H_{d' i} c_i| > eps1`, rediagonalize, repeat
/// until nothing new qualifies, then move to the next threshold. No
/// perturbative correction is applied.
pub fn hci_ground(
    h: &ActiveSpaceHamiltonian,
    sector: (usize, usize),
    opts: &HciOptions,
) -> Result<HciResult> {
    let sched = &opts.eps1_schedule;
    if sched.is_empty() || sched.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::domain("eps1 schedule must be nonempty and positive"));
    }
    if sched.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::domain("eps1 schedule must be nonincreasing"));
    }
    let (na, nb) = sector;
    if na > h.m_orbitals() || nb > h.m_orbitals() {
        return Err(Error::domain("sector does not fit the orbital count"));
    }
    let mut selected: BTreeSet<Determinant> = BTreeSet::new();
    selected.insert(Determinant::aufbau(na, nb));
    let mut current = davidson_ground_list(h, selected.iter().copied().collect(), &opts.solver, None)?;
    let mut stages = Vec::with_capacity(sched.len());
    for &eps in sched {
        let mut rounds = 0;
        loop {
            let state = &current.state;
            let new: BTreeSet<Determinant> = state
                .basis()
                .par_iter()
                .zip(state.coeffs().par_iter())
                .map(|(d, &c)| {
                    let mut found = Vec::new();
                    for_each_connected(h, d, |dp, v| {
                        if (v * c).abs() > eps && !selected.contains(&dp) {
                            found.push(dp);
                        }
                    });
                    found
                })
                .flatten()
                .collect();
            if new.is_empty() {
                break;
            }
            rounds += 1;
            if selected.len() + new.len() > opts.max_determinants {
                return Err(Error::Size {
                    what: "HCI determinant space",
                    requested: selected.len() + new.len(),
                    cap: opts.max_determinants,
                });
            }
            if rounds > opts.max_rounds {
                return Err(Error::NoConvergence {
                    iterations: rounds,
                    best_residual: current.residual,
                });
            }
            selected.extend(new);
            current = davidson_ground_list(
                h,
                selected.iter().copied().collect(),
                &opts.solver,
                Some(&current.state),
            )?;
        }
        stages.push(HciStage {
            eps1: eps,
            energy: current.energy,
            determinants: selected.len(),
            rounds,
        });
    }
    Ok(HciResult {
        result: current,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_dense, matrix_element, DENSE_CAP};
    use crate::toy::random_hamiltonian;

    #[test]
    fn one_dimensional_subspace_is_diagonal_element() {
        let h = random_hamiltonian(4, 2, 2, 3).unwrap();
        let d = Determinant::new(0b0101, 0b0011);
        let s = build_subspace(4, &[d]).unwrap();
        let r = davidson_ground(&h, &s, &SolverOptions::default()).unwrap();
        assert_eq!(r.energy, matrix_element(&h, &d, &d).unwrap());
        assert_eq!(r.dimension, 1);
        assert_eq!(r.d_significant, 1);
    }

    #[test]
    fn two_by_two_subspace_closed_form() {
        let h = random_hamiltonian(4, 2, 1, 6).unwrap();
        let s = Subspace::from_strings(4, vec![0b0011], vec![0b0001, 0b0100]).unwrap();
        let (d1, d2) = (s.determinant(0), s.determinant(1));
        let a = matrix_element(&h, &d1, &d1).unwrap();
        let b = matrix_element(&h, &d2, &d2).unwrap();
        let c = matrix_element(&h, &d1, &d2).unwrap();
        let expected = ((a + b) - ((a - b).powi(2) + 4.0 * c * c).sqrt()) / 2.0;
        let r = davidson_ground(&h, &s, &SolverOptions::default()).unwrap();
        assert!((r.energy - expected).abs() < 1e-13);
    }

    #[test]
    fn single_determinant_variance_is_connected_sum() {
        let h = random_hamiltonian(5, 2, 2, 2).unwrap();
        let d = Determinant::aufbau(2, 2);
        let state = CiVector::new(vec![d], vec![1.0]).unwrap();
        let expected: f64 = crate::fock::connected(&h, &d).iter().map(|(_, v)| v * v).sum();
        assert!((variance(&h, &state) - expected).abs() < 1e-12);
    }

    #[test]
    fn exact_eigenvector_has_zero_variance() {
        let h = random_hamiltonian(4, 2, 2, 12).unwrap();
        let (_, psi) = build_dense(&h, (2, 2), DENSE_CAP).unwrap().ground_state();
        assert!(variance(&h, &psi).abs() < 1e-10);
    }

    #[test]
    fn hci_with_huge_threshold_returns_aufbau_energy() {
        let h = random_hamiltonian(4, 2, 2, 1).unwrap();
        let opts = HciOptions { eps1_schedule: vec![1e6], ..Default::default() };
        let r = hci_ground(&h, (2, 2), &opts).unwrap();
        let d = Determinant::aufbau(2, 2);
        assert_eq!(r.result.energy, matrix_element(&h, &d, &d).unwrap());
        assert_eq!(r.stages[0].determinants, 1);
    }

    #[test]
    fn hci_schedule_validation() {
        let h = random_hamiltonian(4, 2, 2, 1).unwrap();
        for bad in [vec![], vec![1e-3, 1e-2], vec![0.0], vec![-1.0]] {
            let opts = HciOptions { eps1_schedule: bad, ..Default::default() };
            assert!(hci_ground(&h, (2, 2), &opts).is_err());
        }
        let opts = HciOptions { eps1_schedule: vec![1e-9], max_determinants: 5, ..Default::default() };
        assert!(matches!(hci_ground(&h, (2, 2), &opts), Err(Error::Size { .. })));
    }
}
