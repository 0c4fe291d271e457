use crate::error::{Error, Result};
use crate::fock::{low_mask, strings, Determinant};

/// Cartesian product of unique alpha strings and unique beta strings.
///
/// Basis index of `(alpha_strings[i], beta_strings[j])` is
/// `i * beta_strings.len() + j`, which is ascending determinant order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    m: usize,
    n_alpha: usize,
    n_beta: usize,
    alpha_strings: Vec<u64>,
    beta_strings: Vec<u64>,
}

impl Subspace {
    pub fn from_strings(m: usize, mut alpha: Vec<u64>, mut beta: Vec<u64>) -> Result<Self> {
        if m == 0 || m > 64 {
            return Err(Error::domain(format!("orbital count {m} outside 1..=64")));
        }
        if alpha.is_empty() || beta.is_empty() {
            return Err(Error::domain("subspace needs at least one string per spin"));
        }
        alpha.sort_unstable();
        alpha.dedup();
        beta.sort_unstable();
        beta.dedup();
        let mask = low_mask(m);
        let n_alpha = alpha[0].count_ones() as usize;
        let n_beta = beta[0].count_ones() as usize;
        if alpha.iter().any(|s| s.count_ones() as usize != n_alpha || s & !mask != 0)
            || beta.iter().any(|s| s.count_ones() as usize != n_beta || s & !mask != 0)
        {
            return Err(Error::domain(
                "strings must share one particle number per spin and fit in M orbitals",
            ));
        }
        Ok(Self {
            m,
            n_alpha,
            n_beta,
            alpha_strings: alpha,
            beta_strings: beta,
        })
    }

    /// The whole `(n_alpha, n_beta)` sector.
    pub fn full(m: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_alpha > m || n_beta > m {
            return Err(Error::domain("sector does not fit the orbital count"));
        }
        Self::from_strings(m, strings(m, n_alpha), strings(m, n_beta))
    }

    pub fn m_orbitals(&self) -> usize {
        self.m
    }

    pub fn sector(&self) -> (usize, usize) {
        (self.n_alpha, self.n_beta)
    }

    pub fn alpha_strings(&self) -> &[u64] {
        &self.alpha_strings
    }

    pub fn beta_strings(&self) -> &[u64] {
        &self.beta_strings
    }

    /// `d = |alpha strings| * |beta strings|`.
    pub fn dimension(&self) -> usize {
        self.alpha_strings.len() * self.beta_strings.len()
    }

    pub fn determinant(&self, index: usize) -> Determinant {
        let nb = self.beta_strings.len();
        Determinant::new(self.alpha_strings[index / nb], self.beta_strings[index % nb])
    }

    pub fn index_of(&self, d: &Determinant) -> Option<usize> {
        let ia = self.alpha_strings.binary_search(&d.alpha).ok()?;
        let ib = self.beta_strings.binary_search(&d.beta).ok()?;
        Some(ia * self.beta_strings.len() + ib)
    }

    pub fn contains(&self, d: &Determinant) -> bool {
        self.index_of(d).is_some()
    }

    pub fn basis(&self) -> Vec<Determinant> {
        (0..self.dimension()).map(|i| self.determinant(i)).collect()
    }

    pub fn is_superset_of(&self, other: &Subspace) -> bool {
        other
            .alpha_strings
            .iter()
            .all(|s| self.alpha_strings.binary_search(s).is_ok())
            && other
                .beta_strings
                .iter()
                .all(|s| self.beta_strings.binary_search(s).is_ok())
    }
}

/// Subspace spanned by the unique alpha and beta strings of a batch.
pub fn build_subspace(m: usize, batch: &[Determinant]) -> Result<Subspace> {
    let first = batch
        .first()
        .ok_or_else(|| Error::domain("cannot build a subspace from an empty batch"))?;
    let sector = first.particle_numbers();
    if batch.iter().any(|d| d.particle_numbers() != sector) {
        return Err(Error::domain("batch mixes particle-number sectors"));
    }
    Subspace::from_strings(
        m,
        batch.iter().map(|d| d.alpha).collect(),
        batch.iter().map(|d| d.beta).collect(),
    )
}
