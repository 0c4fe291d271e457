//! Hamiltonian actions on determinant subspaces.
//!
//! Product-space rows are enumerated from per-string excitation tables: each
//! alpha (beta) string knows which other strings of the subspace it reaches
//! by a single or same-spin double excitation. A row's couplings are then
//! alpha moves with the beta string fixed, beta moves with the alpha string
//! fixed, and alpha-single x beta-single pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fock::{
    bits, diagonal_energy, excitation_sign, for_each_connected, low_mask, same_spin_double,
    single_value, Determinant,
};
use crate::hamiltonian::ActiveSpaceHamiltonian;

use super::subspace::Subspace;

/// A symmetric operator as seen by the eigensolver.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn diagonal(&self) -> &[f64];
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatvecMode {
    /// Explicit sparse matrix below the threshold, on-the-fly above.
    #[default]
    Auto,
    Sparse,
    Direct,
}

#[derive(Debug, Clone, Copy)]
struct StringSingle {
    target: u32,
    hole: u8,
    particle: u8,
    sign: f64,
    /// `h_ai + sum_{j in s} [(ai|jj) - (aj|ji)]`, excluding the opposite spin.
    same_part: f64,
}

struct StringTable {
    singles: Vec<Vec<StringSingle>>,
    doubles: Vec<Vec<(u32, f64)>>,
}

impl StringTable {
    fn new(h: &ActiveSpaceHamiltonian, list: &[u64]) -> Self {
        let full = low_mask(h.m_orbitals());
        let rows: Vec<(Vec<StringSingle>, Vec<(u32, f64)>)> = list
            .par_iter()
            .map(|&s| {
                let mut singles = Vec::new();
                let mut doubles = Vec::new();
                let vir = full & !s;
                for i in bits(s) {
                    for a in bits(vir) {
                        let t = (s & !(1u64 << i)) | (1u64 << a);
                        if let Ok(j) = list.binary_search(&t) {
                            singles.push(StringSingle {
                                target: j as u32,
                                hole: i as u8,
                                particle: a as u8,
                                sign: excitation_sign(s, i, a),
                                same_part: single_value(h, s, 0, i, a),
                            });
                        }
                    }
                }
                for i in bits(s) {
                    for j in bits(s & !low_mask(i + 1)) {
                        for a in bits(vir) {
                            for b in bits(vir & !low_mask(a + 1)) {
                                let t = (s & !(1u64 << i) & !(1u64 << j)) | (1u64 << a) | (1u64 << b);
                                if let Ok(k) = list.binary_search(&t) {
                                    let v = same_spin_double(h, s, t);
                                    if v != 0.0 {
                                        doubles.push((k as u32, v));
                                    }
                                }
                            }
                        }
                    }
                }
                (singles, doubles)
            })
            .collect();
        let (singles, doubles) = rows.into_iter().unzip();
        Self { singles, doubles }
    }
}

/// `H` restricted to a product subspace.
pub struct ProductSpaceHamiltonian<'a> {
    h: &'a ActiveSpaceHamiltonian,
    subspace: &'a Subspace,
    alpha: StringTable,
    beta: StringTable,
    diagonal: Vec<f64>,
    sparse: Option<Csr>,
}

impl<'a> ProductSpaceHamiltonian<'a> {
    pub fn new(
        h: &'a ActiveSpaceHamiltonian,
        subspace: &'a Subspace,
        mode: MatvecMode,
        sparse_threshold: usize,
    ) -> Self {
        let alpha = StringTable::new(h, subspace.alpha_strings());
        let beta = StringTable::new(h, subspace.beta_strings());
        let diagonal = (0..subspace.dimension())
            .into_par_iter()
            .map(|i| diagonal_energy(h, &subspace.determinant(i)))
            .collect();
        let mut op = Self {
            h,
            subspace,
            alpha,
            beta,
            diagonal,
            sparse: None,
        };
        let use_sparse = match mode {
            MatvecMode::Sparse => true,
            MatvecMode::Direct => false,
            MatvecMode::Auto => subspace.dimension() <= sparse_threshold,
        };
        if use_sparse {
            op.sparse = Some(Csr::from_rows(op.dim(), |row, out| op.row(row, out)));
        }
        op
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse.is_some()
    }

    /// Off-diagonal couplings `(column, <col|H|row>)` of one row.
    fn row(&self, row: usize, out: &mut Vec<(u32, f64)>) {
        let h = self.h;
        let nb = self.subspace.beta_strings().len();
        let (ia, ib) = (row / nb, row % nb);
        let sa = self.subspace.alpha_strings()[ia];
        let sb = self.subspace.beta_strings()[ib];
        for x in &self.alpha.singles[ia] {
            let (i, a) = (x.hole as usize, x.particle as usize);
            let cross: f64 = bits(sb).map(|q| h.eri(a, i, q, q)).sum();
            out.push(((x.target as usize * nb + ib) as u32, x.sign * (x.same_part + cross)));
        }
        for &(ja, v) in &self.alpha.doubles[ia] {
            out.push(((ja as usize * nb + ib) as u32, v));
        }
        for x in &self.beta.singles[ib] {
            let (i, a) = (x.hole as usize, x.particle as usize);
            let cross: f64 = bits(sa).map(|q| h.eri(a, i, q, q)).sum();
            out.push(((ia * nb + x.target as usize) as u32, x.sign * (x.same_part + cross)));
        }
        for &(jb, v) in &self.beta.doubles[ib] {
            out.push(((ia * nb + jb as usize) as u32, v));
        }
        for xa in &self.alpha.singles[ia] {
            let (i, a) = (xa.hole as usize, xa.particle as usize);
            let base = xa.target as usize * nb;
            for xb in &self.beta.singles[ib] {
                let v = xa.sign * xb.sign * h.eri(a, i, xb.particle as usize, xb.hole as usize);
                if v != 0.0 {
                    out.push(((base + xb.target as usize) as u32, v));
                }
            }
        }
    }
}

impl LinearOperator for ProductSpaceHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.subspace.dimension()
    }

    fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        if let Some(csr) = &self.sparse {
            csr.apply(&self.diagonal, x, y);
            return;
        }
        y.par_iter_mut().enumerate().for_each_init(Vec::new, |buf, (row, yi)| {
            buf.clear();
            self.row(row, buf);
            let mut acc = self.diagonal[row] * x[row];
            for &(c, v) in buf.iter() {
                acc += v * x[c as usize];
            }
            *yi = acc;
        });
    }
}

/// Compressed sparse rows of the off-diagonal part.
struct Csr {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_rows(n: usize, row: impl Fn(usize, &mut Vec<(u32, f64)>) + Sync) -> Self {
        let chunk = 256;
        let parts: Vec<(Vec<usize>, Vec<(u32, f64)>)> = (0..n.div_ceil(chunk))
            .into_par_iter()
            .map(|c| {
                let mut lens = Vec::with_capacity(chunk);
                let mut entries = Vec::new();
                for r in c * chunk..((c + 1) * chunk).min(n) {
                    let before = entries.len();
                    row(r, &mut entries);
                    lens.push(entries.len() - before);
                }
                (lens, entries)
            })
            .collect();
        let nnz = parts.iter().map(|p| p.1.len()).sum();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        offsets.push(0);
        for (lens, entries) in parts {
            for l in lens {
                offsets.push(offsets.last().unwrap() + l);
            }
            for (c, v) in entries {
                cols.push(c);
                vals.push(v);
            }
        }
        Self { offsets, cols, vals }
    }

    fn apply(&self, diagonal: &[f64], x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, yi)| {
            let mut acc = diagonal[r] * x[r];
            for k in self.offsets[r]..self.offsets[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = acc;
        });
    }
}

/// `H` over an arbitrary sorted list of determinants (selected CI).
pub struct DeterminantListHamiltonian {
    diagonal: Vec<f64>,
    csr: Csr,
}

impl DeterminantListHamiltonian {
    pub fn new(h: &ActiveSpaceHamiltonian, basis: &[Determinant]) -> Self {
        let diagonal = basis.par_iter().map(|d| diagonal_energy(h, d)).collect();
        let csr = Csr::from_rows(basis.len(), |row, out| {
            for_each_connected(h, &basis[row], |d, v| {
                if v != 0.0 {
                    if let Ok(c) = basis.binary_search(&d) {
                        out.push((c as u32, v));
                    }
                }
            });
        });
        Self { diagonal, csr }
    }
}

impl LinearOperator for DeterminantListHamiltonian {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.csr.apply(&self.diagonal, x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_dense, DENSE_CAP};
    use crate::toy::random_hamiltonian;

    fn dense_of(op: &dyn LinearOperator) -> Vec<Vec<f64>> {
        let n = op.dim();
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let mut y = vec![0.0; n];
                op.apply(&e, &mut y);
                y
            })
            .collect()
    }

    #[test]
    fn product_operator_matches_dense_sector() {
        let h = random_hamiltonian(5, 2, 3, 4).unwrap();
        let s = Subspace::full(5, 2, 3).unwrap();
        let dense = build_dense(&h, (2, 3), DENSE_CAP).unwrap();
        for mode in [MatvecMode::Sparse, MatvecMode::Direct] {
            let op = ProductSpaceHamiltonian::new(&h, &s, mode, 0);
            assert_eq!(op.is_sparse(), mode == MatvecMode::Sparse);
            let cols = dense_of(&op);
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    assert!((v - dense.matrix[(i, j)]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn partial_product_space_matches_matrix_elements() {
        let h = random_hamiltonian(6, 3, 2, 8).unwrap();
        let s = Subspace::from_strings(6, vec![0b000111, 0b011010, 0b101001, 0b110100], vec![0b000011, 0b100100, 0b010001]).unwrap();
        let op = ProductSpaceHamiltonian::new(&h, &s, MatvecMode::Direct, 0);
        let cols = dense_of(&op);
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                let e = crate::fock::matrix_element(&h, &s.determinant(i), &s.determinant(j)).unwrap();
                assert!((v - e).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn list_operator_matches_matrix_elements() {
        let h = random_hamiltonian(4, 2, 2, 1).unwrap();
        let mut basis = vec![
            Determinant::new(0b0011, 0b0011),
            Determinant::new(0b0101, 0b0011),
            Determinant::new(0b1100, 0b1100),
            Determinant::new(0b0011, 0b1001),
        ];
        basis.sort();
        let op = DeterminantListHamiltonian::new(&h, &basis);
        let cols = dense_of(&op);
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                let e = crate::fock::matrix_element(&h, &basis[i], &basis[j]).unwrap();
                assert!((v - e).abs() < 1e-13);
            }
        }
    }
}
