//! Independent oracles shared by the integration tests.
//!
//! Everything here works on the full `2^(2M)` Fock space with explicit
//! creation and annihilation operators, sharing no code with the library's
//! Slater–Condon kernels.

#![allow(dead_code)]

use nalgebra::DMatrix;
use sqd_core::{ActiveSpaceHamiltonian, Determinant};

/// Spin orbital index: alpha `p` is `p`, beta `p` is `M + p`.
pub fn so(m: usize, p: usize, beta: bool) -> usize {
    if beta {
        m + p
    } else {
        p
    }
}

pub fn annihilate(state: u128, k: usize) -> Option<(u128, f64)> {
    if state >> k & 1 == 0 {
        return None;
    }
    let below = (state & ((1u128 << k) - 1)).count_ones();
    Some((state ^ (1u128 << k), if below % 2 == 0 { 1.0 } else { -1.0 }))
}

pub fn create(state: u128, k: usize) -> Option<(u128, f64)> {
    if state >> k & 1 == 1 {
        return None;
    }
    let below = (state & ((1u128 << k) - 1)).count_ones();
    Some((state | (1u128 << k), if below % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Applies `ops` right to left; `(k, true)` is a creator.
pub fn apply_string(state: u128, ops: &[(usize, bool)]) -> Option<(u128, f64)> {
    let mut s = state;
    let mut sign = 1.0;
    for &(k, dagger) in ops.iter().rev() {
        let (ns, sg) = if dagger { create(s, k)? } else { annihilate(s, k)? };
        s = ns;
        sign *= sg;
    }
    Some((s, sign))
}

pub fn to_fock(m: usize, d: &Determinant) -> u128 {
    d.alpha as u128 | ((d.beta as u128) << m)
}

/// `<x|H|y>` for Fock states, by summing every operator term of the
/// second-quantized Hamiltonian.
pub fn fock_element(h: &ActiveSpaceHamiltonian, x: u128, y: u128) -> f64 {
    let m = h.m_orbitals();
    let mut v = if x == y { h.e_core() } else { 0.0 };
    for sigma in [false, true] {
        for p in 0..m {
            for r in 0..m {
                let ops = [(so(m, p, sigma), true), (so(m, r, sigma), false)];
                if let Some((s, sg)) = apply_string(y, &ops) {
                    if s == x {
                        v += sg * h.h_one(p, r);
                    }
                }
            }
        }
    }
    for sigma in [false, true] {
        for tau in [false, true] {
            for p in 0..m {
                for r in 0..m {
                    for q in 0..m {
                        for s_ in 0..m {
                            let g = h.eri(p, r, q, s_);
                            if g == 0.0 {
                                continue;
                            }
                            let ops = [
                                (so(m, p, sigma), true),
                                (so(m, q, tau), true),
                                (so(m, s_, tau), false),
                                (so(m, r, sigma), false),
                            ];
                            if let Some((s, sg)) = apply_string(y, &ops) {
                                if s == x {
                                    v += 0.5 * g * sg;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    v
}

/// Sector basis enumerated by brute force over all Fock states, in the
/// canonical (alpha, beta) order.
pub fn brute_sector(m: usize, na: usize, nb: usize) -> Vec<Determinant> {
    let mut out = Vec::new();
    for a in 0u64..(1 << m) {
        for b in 0u64..(1 << m) {
            if a.count_ones() as usize == na && b.count_ones() as usize == nb {
                out.push(Determinant::new(a, b));
            }
        }
    }
    out.sort();
    out
}

pub fn fock_sector_matrix(h: &ActiveSpaceHamiltonian, basis: &[Determinant]) -> DMatrix<f64> {
    let m = h.m_orbitals();
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| {
        fock_element(h, to_fock(m, &basis[i]), to_fock(m, &basis[j]))
    })
}

/// Matrix of the spin-summed one-body operator `sum_{pr,sigma} k_pr a+_p a_r`
/// over a sector basis.
pub fn one_body_matrix(m: usize, k: &DMatrix<f64>, basis: &[Determinant]) -> DMatrix<f64> {
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| {
        let x = to_fock(m, &basis[i]);
        let y = to_fock(m, &basis[j]);
        let mut v = 0.0;
        for sigma in [false, true] {
            for p in 0..m {
                for r in 0..m {
                    let ops = [(so(m, p, sigma), true), (so(m, r, sigma), false)];
                    if let Some((s, sg)) = apply_string(y, &ops) {
                        if s == x {
                            v += sg * k[(p, r)];
                        }
                    }
                }
            }
        }
        v
    })
}

/// Lowest eigenvalue of a dense symmetric matrix.
pub fn lowest_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}
