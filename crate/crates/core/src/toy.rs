//! Seeded synthetic Hamiltonians for tests, demos and benchmarks.
//!
//! Two-body integrals are assembled from symmetric factor matrices,
//! `(pr|qs) = sum_k L_k[pr] L_k[qs]`, which yields the 8-fold symmetry and a
//! positive semidefinite pair matrix like real electron-repulsion integrals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::hamiltonian::ActiveSpaceHamiltonian;

/// Random molecule-like Hamiltonian: ascending orbital energies, weak
/// one-body mixing, Coulomb-dominated two-body terms.
pub fn random_hamiltonian(
    m: usize,
    n_alpha: usize,
    n_beta: usize,
    seed: u64,
) -> Result<ActiveSpaceHamiltonian> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = ActiveSpaceHamiltonian::zeros(m, n_alpha, n_beta)?;
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    for p in 0..m {
        let eps = -1.5 + 2.5 * p as f64 / m as f64 + 0.05 * gauss(&mut rng);
        h.set_h_one(p, p, eps);
        for r in 0..p {
            h.set_h_one(p, r, 0.08 * gauss(&mut rng));
        }
    }

    // factor 0 is a uniform Coulomb background, factors 1..=m carry
    // orbital-local repulsion plus random exchange-like structure
    let mut factors = vec![vec![0.0; m * m]; m + 1];
    for p in 0..m {
        factors[0][p * m + p] = 0.45;
    }
    for (k, f) in factors.iter_mut().enumerate().skip(1) {
        for p in 0..m {
            for r in 0..=p {
                let mut v = 0.06 * gauss(&mut rng);
                if p == r && p == k - 1 {
                    v += 0.35;
                }
                f[p * m + r] = v;
                f[r * m + p] = v;
            }
        }
    }
    for p in 0..m {
        for r in 0..=p {
            for q in 0..m {
                for s in 0..=q {
                    if (q, s) > (p, r) {
                        continue;
                    }
                    let v: f64 = factors
                        .iter()
                        .map(|f| f[p * m + r] * f[q * m + s])
                        .sum();
                    h.set_eri(p, r, q, s, v);
                }
            }
        }
    }
    h.set_e_core(0.5 + 0.1 * gauss(&mut rng));
    Ok(h)
}

/// Dimer orbital index of each fragment orbital: occupied orbitals of `a`,
/// then of `b`, then the virtuals of `a` and of `b`. With this layout the
/// dimer's aufbau determinant is the product of the fragments' aufbau
/// determinants.
pub fn dimer_orbitals(
    a: &ActiveSpaceHamiltonian,
    b: &ActiveSpaceHamiltonian,
) -> (Vec<usize>, Vec<usize>) {
    let occ = |h: &ActiveSpaceHamiltonian| h.n_alpha().max(h.n_beta());
    let (oa, ob) = (occ(a), occ(b));
    let (ma, mb) = (a.m_orbitals(), b.m_orbitals());
    let map_a = (0..ma).map(|p| if p < oa { p } else { oa + ob + (p - oa) }).collect();
    let map_b = (0..mb)
        .map(|p| if p < ob { oa + p } else { ma + ob + (p - ob) })
        .collect();
    (map_a, map_b)
}

/// Two non-interacting fragments laid out by [`dimer_orbitals`]. No
/// integral couples the fragments, so the combined ground state in the
/// summed sector is the product of fragment ground states whenever charge
/// transfer is energetically unfavourable.
pub fn block_dimer(
    a: &ActiveSpaceHamiltonian,
    b: &ActiveSpaceHamiltonian,
) -> Result<ActiveSpaceHamiltonian> {
    let mut h = ActiveSpaceHamiltonian::zeros(
        a.m_orbitals() + b.m_orbitals(),
        a.n_alpha() + b.n_alpha(),
        a.n_beta() + b.n_beta(),
    )?;
    h.set_e_core(a.e_core() + b.e_core());
    let (map_a, map_b) = dimer_orbitals(a, b);
    for (frag, map) in [(a, &map_a), (b, &map_b)] {
        let mf = frag.m_orbitals();
        for p in 0..mf {
            for r in 0..mf {
                h.set_h_one(map[p], map[r], frag.h_one(p, r));
                for q in 0..mf {
                    for s in 0..mf {
                        h.set_eri(map[p], map[r], map[q], map[s], frag.eri(p, r, q, s));
                    }
                }
            }
        }
    }
    Ok(h)
}

/// [`block_dimer`] plus inter-fragment hopping and Coulomb terms of size
/// `coupling`, mimicking a bound complex.
pub fn coupled_dimer(
    a: &ActiveSpaceHamiltonian,
    b: &ActiveSpaceHamiltonian,
    coupling: f64,
    seed: u64,
) -> Result<ActiveSpaceHamiltonian> {
    let mut h = block_dimer(a, b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (map_a, map_b) = dimer_orbitals(a, b);
    for &p in &map_a {
        for &q in &map_b {
            let t: f64 = rng.sample(StandardNormal);
            h.set_h_one(p, q, coupling * t);
            h.set_eri(p, p, q, q, coupling * (1.0 + 0.2 * rng.random::<f64>()));
        }
    }
    h.set_e_core(h.e_core() + coupling);
    Ok(h)
}
