//! Determinants, Slater–Condon matrix elements and the dense sector oracle.
//!
//! Spin orbitals are ordered `a0 .. a(M-1), b0 .. b(M-1)`. Because every
//! operator in the Hamiltonian conserves each spin's particle number, the
//! fermionic phase of an excitation only involves occupied bits of the same
//! spin lying strictly between the hole and the particle.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::ActiveSpaceHamiltonian;

/// Default cap on the dense sector dimension.
pub const DENSE_CAP: usize = 20_000;

/// An occupation pattern: bit `p` of `alpha` (`beta`) set means spin orbital
/// `p` with spin up (down) is occupied. Also used for raw device bitstrings,
/// whose particle numbers are unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Determinant {
    pub alpha: u64,
    pub beta: u64,
}

impl Determinant {
    pub const fn new(alpha: u64, beta: u64) -> Self {
        Self { alpha, beta }
    }

    pub fn from_orbitals(alpha: &[usize], beta: &[usize]) -> Self {
        let mask = |orbs: &[usize]| orbs.iter().fold(0u64, |m, &p| m | (1u64 << p));
        Self::new(mask(alpha), mask(beta))
    }

    pub fn n_alpha(&self) -> u32 {
        self.alpha.count_ones()
    }

    pub fn n_beta(&self) -> u32 {
        self.beta.count_ones()
    }

    pub fn particle_numbers(&self) -> (usize, usize) {
        (self.n_alpha() as usize, self.n_beta() as usize)
    }

    /// Number of electrons that must move to turn `self` into `other`
    /// (only meaningful for equal particle numbers).
    pub fn excitation_degree(&self, other: &Determinant) -> u32 {
        ((self.alpha ^ other.alpha).count_ones() + (self.beta ^ other.beta).count_ones()) / 2
    }

    /// Lowest-orbital filling in both spin sectors.
    pub fn aufbau(n_alpha: usize, n_beta: usize) -> Self {
        Self::new(low_mask(n_alpha), low_mask(n_beta))
    }
}

impl fmt::Display for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:#b}, {:#b})", self.alpha, self.beta)
    }
}

#[inline]
pub(crate) fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Iterator over the set bit positions of a mask, ascending.
#[derive(Clone, Copy)]
pub struct Bits(u64);

impl Iterator for Bits {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let p = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(p)
    }
}

#[inline]
pub fn bits(mask: u64) -> Bits {
    Bits(mask)
}

/// All `m`-bit strings with `n` set bits, ascending.
pub fn strings(m: usize, n: usize) -> Vec<u64> {
    if n > m {
        return Vec::new();
    }
    if n == 0 {
        return vec![0];
    }
    let limit = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let mut out = Vec::with_capacity(binomial(m, n));
    let mut v = low_mask(n);
    loop {
        out.push(v);
        // Gosper's hack
        let t = v | (v - 1);
        if t == u64::MAX {
            break;
        }
        let next = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
        if next > limit {
            break;
        }
        v = next;
    }
    out
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Phase of `a+_to a_from` acting on `s` (`from` occupied, `to` empty).
#[inline]
pub(crate) fn excitation_sign(s: u64, from: usize, to: usize) -> f64 {
    let (lo, hi) = if from < to { (from, to) } else { (to, from) };
    let between = if hi - lo <= 1 {
        0
    } else {
        (low_mask(hi) & !low_mask(lo + 1)) & s
    };
    if between.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `<d|H|d>`.
pub(crate) fn diagonal_energy(h: &ActiveSpaceHamiltonian, d: &Determinant) -> f64 {
    let mut e = h.e_core();
    for s in [d.alpha, d.beta] {
        for p in bits(s) {
            e += h.h_one(p, p);
            for q in bits(s) {
                e += 0.5 * (h.eri(p, p, q, q) - h.eri(p, q, q, p));
            }
        }
    }
    for p in bits(d.alpha) {
        for q in bits(d.beta) {
            e += h.eri(p, p, q, q);
        }
    }
    e
}

/// Unsigned single-excitation element `i -> a` in the spin sector `same`,
/// with `other` the opposite-spin string.
#[inline]
pub(crate) fn single_value(
    h: &ActiveSpaceHamiltonian,
    same: u64,
    other: u64,
    i: usize,
    a: usize,
) -> f64 {
    let mut v = h.h_one(a, i);
    for j in bits(same) {
        v += h.eri(a, i, j, j) - h.eri(a, j, j, i);
    }
    for j in bits(other) {
        v += h.eri(a, i, j, j);
    }
    v
}

/// `<d1|H|d2>`.
pub fn matrix_element(
    h: &ActiveSpaceHamiltonian,
    d1: &Determinant,
    d2: &Determinant,
) -> Result<f64> {
    if d1.particle_numbers() != d2.particle_numbers() {
        return Err(Error::domain(format!(
            "particle numbers differ: {:?} vs {:?}",
            d1.particle_numbers(),
            d2.particle_numbers()
        )));
    }
    Ok(element_unchecked(h, d1, d2))
}

pub(crate) fn element_unchecked(h: &ActiveSpaceHamiltonian, d1: &Determinant, d2: &Determinant) -> f64 {
    let xa = d1.alpha ^ d2.alpha;
    let xb = d1.beta ^ d2.beta;
    let (na, nb) = (xa.count_ones() / 2, xb.count_ones() / 2);
    match (na, nb) {
        (0, 0) => diagonal_energy(h, d2),
        (1, 0) => {
            let i = (d2.alpha & xa).trailing_zeros() as usize;
            let a = (d1.alpha & xa).trailing_zeros() as usize;
            excitation_sign(d2.alpha, i, a) * single_value(h, d2.alpha, d2.beta, i, a)
        }
        (0, 1) => {
            let i = (d2.beta & xb).trailing_zeros() as usize;
            let a = (d1.beta & xb).trailing_zeros() as usize;
            excitation_sign(d2.beta, i, a) * single_value(h, d2.beta, d2.alpha, i, a)
        }
        (2, 0) => same_spin_double(h, d2.alpha, d1.alpha),
        (0, 2) => same_spin_double(h, d2.beta, d1.beta),
        (1, 1) => {
            let i = (d2.alpha & xa).trailing_zeros() as usize;
            let a = (d1.alpha & xa).trailing_zeros() as usize;
            let j = (d2.beta & xb).trailing_zeros() as usize;
            let b = (d1.beta & xb).trailing_zeros() as usize;
            excitation_sign(d2.alpha, i, a) * excitation_sign(d2.beta, j, b) * h.eri(a, i, b, j)
        }
        _ => 0.0,
    }
}

/// Same-spin double excitation from string `from` to string `to`.
#[inline]
pub(crate) fn same_spin_double(h: &ActiveSpaceHamiltonian, from: u64, to: u64) -> f64 {
    let holes = from & !to;
    let parts = to & !from;
    let i = holes.trailing_zeros() as usize;
    let j = (holes & (holes - 1)).trailing_zeros() as usize;
    let a = parts.trailing_zeros() as usize;
    let b = (parts & (parts - 1)).trailing_zeros() as usize;
    double_value(h, from, i, j, a, b)
}

#[inline]
pub(crate) fn double_value(h: &ActiveSpaceHamiltonian, from: u64, i: usize, j: usize, a: usize, b: usize) -> f64 {
    let s1 = excitation_sign(from, i, a);
    let mid = (from & !(1u64 << i)) | (1u64 << a);
    let s2 = excitation_sign(mid, j, b);
    s1 * s2 * (h.eri(a, i, b, j) - h.eri(a, j, b, i))
}

/// All determinants reachable from `d` by one or two excitations with a
/// nonzero matrix element, sorted, paired with `<d'|H|d>`.
pub fn connected(h: &ActiveSpaceHamiltonian, d: &Determinant) -> Vec<(Determinant, f64)> {
    let mut out = Vec::new();
    for_each_connected(h, d, |dp, v| {
        if v != 0.0 {
            out.push((dp, v));
        }
    });
    out.sort_unstable_by_key(|e| e.0);
    out
}

/// Visits every single and double excitation of `d` (including zero
/// elements) in a fixed order.
pub(crate) fn for_each_connected(
    h: &ActiveSpaceHamiltonian,
    d: &Determinant,
    mut visit: impl FnMut(Determinant, f64),
) {
    let full = low_mask(h.m_orbitals());
    let (va, vb) = (full & !d.alpha, full & !d.beta);

    for (same, other, vir, is_alpha) in [(d.alpha, d.beta, va, true), (d.beta, d.alpha, vb, false)] {
        for i in bits(same) {
            for a in bits(vir) {
                let v = excitation_sign(same, i, a) * single_value(h, same, other, i, a);
                let s = (same & !(1u64 << i)) | (1u64 << a);
                visit(if is_alpha { Determinant::new(s, other) } else { Determinant::new(other, s) }, v);
            }
        }
        for i in bits(same) {
            for j in bits(same & !low_mask(i + 1)) {
                for a in bits(vir) {
                    for b in bits(vir & !low_mask(a + 1)) {
                        let v = double_value(h, same, i, j, a, b);
                        let s = (same & !(1u64 << i) & !(1u64 << j)) | (1u64 << a) | (1u64 << b);
                        visit(if is_alpha { Determinant::new(s, other) } else { Determinant::new(other, s) }, v);
                    }
                }
            }
        }
    }
    for i in bits(d.alpha) {
        for a in bits(va) {
            let sa = excitation_sign(d.alpha, i, a);
            let na = (d.alpha & !(1u64 << i)) | (1u64 << a);
            for j in bits(d.beta) {
                for b in bits(vb) {
                    let v = sa * excitation_sign(d.beta, j, b) * h.eri(a, i, b, j);
                    let nb = (d.beta & !(1u64 << j)) | (1u64 << b);
                    visit(Determinant::new(na, nb), v);
                }
            }
        }
    }
}

/// Canonically ordered basis of a particle-number sector.
pub fn sector_basis(m: usize, n_alpha: usize, n_beta: usize) -> Vec<Determinant> {
    let betas = strings(m, n_beta);
    strings(m, n_alpha)
        .into_iter()
        .flat_map(|a| betas.iter().map(move |&b| Determinant::new(a, b)))
        .collect()
}

/// Real CI expansion over a sorted, duplicate-free determinant basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CiVector {
    basis: Vec<Determinant>,
    coeffs: Vec<f64>,
}

impl CiVector {
    pub fn new(basis: Vec<Determinant>, coeffs: Vec<f64>) -> Result<Self> {
        if basis.len() != coeffs.len() {
            return Err(Error::domain("basis and coefficient lengths differ"));
        }
        if basis.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("CI basis must be sorted and duplicate-free"));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &[Determinant] {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.coeffs.iter_mut().for_each(|c| *c /= n);
        }
    }

    pub fn coefficient(&self, d: &Determinant) -> f64 {
        self.basis
            .binary_search(d)
            .map(|i| self.coeffs[i])
            .unwrap_or(0.0)
    }

    /// `<n_p sigma>` for all `2M` spin orbitals (alpha block first).
    pub fn occupations(&self, m: usize) -> Vec<f64> {
        let mut occ = vec![0.0; 2 * m];
        for (d, c) in self.basis.iter().zip(&self.coeffs) {
            let w = c * c;
            for p in bits(d.alpha) {
                occ[p] += w;
            }
            for p in bits(d.beta) {
                occ[m + p] += w;
            }
        }
        occ
    }

    /// `<psi|H|psi>` by explicit Slater–Condon evaluation over all pairs.
    pub fn expectation(&self, h: &ActiveSpaceHamiltonian) -> f64 {
        let mut e = 0.0;
        for (i, (di, ci)) in self.basis.iter().zip(&self.coeffs).enumerate() {
            e += ci * ci * element_unchecked(h, di, di);
            for (dj, cj) in self.basis[..i].iter().zip(&self.coeffs) {
                if di.excitation_degree(dj) <= 2 {
                    e += 2.0 * ci * cj * element_unchecked(h, di, dj);
                }
            }
        }
        e
    }
}

/// The Hamiltonian over a whole sector as a dense matrix.
#[derive(Debug, Clone)]
pub struct DenseSector {
    pub basis: Vec<Determinant>,
    pub matrix: DMatrix<f64>,
}

impl DenseSector {
    /// Lowest eigenpair as `(energy, ground state)`.
    pub fn ground_state(&self) -> (f64, CiVector) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let k = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(k);
        // fix the sign so the largest component is positive
        let big = v.iamax();
        let sign = if v[big] < 0.0 { -1.0 } else { 1.0 };
        let coeffs = v.iter().map(|c| sign * c).collect();
        (
            eig.eigenvalues[k],
            CiVector {
                basis: self.basis.clone(),
                coeffs,
            },
        )
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Full sector Hamiltonian, assembled with [`matrix_element`].
pub fn build_dense(
    h: &ActiveSpaceHamiltonian,
    sector: (usize, usize),
    cap: usize,
) -> Result<DenseSector> {
    let m = h.m_orbitals();
    let (na, nb) = sector;
    if na > m || nb > m {
        return Err(Error::domain(format!("sector {sector:?} does not fit {m} orbitals")));
    }
    let dim = binomial(m, na).saturating_mul(binomial(m, nb));
    if dim > cap {
        return Err(Error::Size {
            what: "dense sector matrix",
            requested: dim,
            cap,
        });
    }
    let basis = sector_basis(m, na, nb);
    let mut matrix = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            if basis[i].excitation_degree(&basis[j]) > 2 {
                continue;
            }
            let v = element_unchecked(h, &basis[i], &basis[j]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Ok(DenseSector { basis, matrix })
}

/// Exact (CASCI) ground energy of the Hamiltonian's own sector.
pub fn casci_energy(h: &ActiveSpaceHamiltonian, cap: usize) -> Result<f64> {
    Ok(build_dense(h, h.sector(), cap)?.ground_state().0)
}
