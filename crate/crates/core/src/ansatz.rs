//! LUCJ-form state preparation in a fixed particle-number sector.
//!
//! States are complex amplitude vectors over the canonical `(alpha, beta)`
//! sector basis. Orbital rotations `exp(K)` are evaluated as
//! exponential-times-vector by a scaled Taylor series of the one-body
//! operator; Jastrow factors are diagonal phases.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{bits, excitation_sign, strings, Determinant};
use crate::hamiltonian::ActiveSpaceHamiltonian;

const ANTISYMMETRY_TOL: f64 = 1e-12;
const EXPM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    m: usize,
    alpha_strings: Vec<u64>,
    beta_strings: Vec<u64>,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(m: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if m == 0 || m > 64 || n_alpha > m || n_beta > m {
            return Err(Error::domain(format!(
                "sector ({n_alpha}, {n_beta}) invalid for {m} orbitals"
            )));
        }
        let alpha_strings = strings(m, n_alpha);
        let beta_strings = strings(m, n_beta);
        let dim = alpha_strings.len() * beta_strings.len();
        Ok(Self {
            m,
            alpha_strings,
            beta_strings,
            amplitudes: vec![Complex64::new(0.0, 0.0); dim],
        })
    }

    pub fn from_amplitudes(
        m: usize,
        n_alpha: usize,
        n_beta: usize,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        let mut v = Self::zeros(m, n_alpha, n_beta)?;
        if amplitudes.len() != v.amplitudes.len() {
            return Err(Error::domain(format!(
                "expected {} amplitudes, got {}",
                v.amplitudes.len(),
                amplitudes.len()
            )));
        }
        v.amplitudes = amplitudes;
        Ok(v)
    }

    pub fn m_orbitals(&self) -> usize {
        self.m
    }

    pub fn sector(&self) -> (usize, usize) {
        (
            self.alpha_strings[0].count_ones() as usize,
            self.beta_strings[0].count_ones() as usize,
        )
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn determinant(&self, index: usize) -> Determinant {
        let nb = self.beta_strings.len();
        Determinant::new(self.alpha_strings[index / nb], self.beta_strings[index % nb])
    }

    pub fn basis(&self) -> impl Iterator<Item = Determinant> + '_ {
        (0..self.dim()).map(|i| self.determinant(i))
    }

    pub fn index_of(&self, d: &Determinant) -> Option<usize> {
        let ia = self.alpha_strings.binary_search(&d.alpha).ok()?;
        let ib = self.beta_strings.binary_search(&d.beta).ok()?;
        Some(ia * self.beta_strings.len() + ib)
    }

    pub fn amplitude(&self, d: &Determinant) -> Complex64 {
        self.index_of(d)
            .map(|i| self.amplitudes[i])
            .unwrap_or_default()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|<x|psi>|^2` in basis order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn single_excitations(strings: &[u64], m: usize) -> Vec<Vec<(usize, usize, usize, f64)>> {
        // per string: (target index, p, r, sign) for a+_p a_r, p != r
        strings
            .iter()
            .map(|&s| {
                let mut out = Vec::new();
                for r in bits(s) {
                    for p in bits(!s & crate::fock::low_mask(m)) {
                        let t = (s & !(1u64 << r)) | (1u64 << p);
                        let j = strings.binary_search(&t).expect("sector closed under excitation");
                        out.push((j, p, r, excitation_sign(s, r, p)));
                    }
                }
                out
            })
            .collect()
    }
}

/// `|x_RHF>`: orbitals `0..n` doubly occupied.
pub fn prepare_rhf(m: usize, n_alpha: usize, n_beta: usize) -> Result<StateVector> {
    if n_alpha != n_beta {
        return Err(Error::Unsupported(format!(
            "RHF reference needs a closed shell, got ({n_alpha}, {n_beta})"
        )));
    }
    let mut v = StateVector::zeros(m, n_alpha, n_beta)?;
    let idx = v
        .index_of(&Determinant::aufbau(n_alpha, n_beta))
        .expect("aufbau determinant is in its own sector");
    v.amplitudes[idx] = Complex64::new(1.0, 0.0);
    Ok(v)
}

fn check_antisymmetric(k: &DMatrix<f64>, m: usize) -> Result<()> {
    if k.nrows() != m || k.ncols() != m {
        return Err(Error::domain(format!(
            "orbital rotation generator must be {m}x{m}, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    let dev = (k + k.transpose()).amax();
    if dev > ANTISYMMETRY_TOL {
        return Err(Error::domain(format!(
            "orbital rotation generator is not antisymmetric (|K + K^T| = {dev:.3e})"
        )));
    }
    Ok(())
}

/// `w = K_hat v` for the spin-summed one-body operator.
fn apply_one_body(
    k: &DMatrix<f64>,
    v: &[Complex64],
    alpha_exc: &[Vec<(usize, usize, usize, f64)>],
    beta_exc: &[Vec<(usize, usize, usize, f64)>],
    alpha_strings: &[u64],
    beta_strings: &[u64],
) -> Vec<Complex64> {
    let nb = beta_strings.len();
    let mut w = vec![Complex64::new(0.0, 0.0); v.len()];
    let diag = |s: u64| bits(s).map(|p| k[(p, p)]).sum::<f64>();
    let da: Vec<f64> = alpha_strings.iter().map(|&s| diag(s)).collect();
    let db: Vec<f64> = beta_strings.iter().map(|&s| diag(s)).collect();
    for ia in 0..alpha_strings.len() {
        for ib in 0..nb {
            let x = v[ia * nb + ib];
            if x == Complex64::default() {
                continue;
            }
            w[ia * nb + ib] += x * (da[ia] + db[ib]);
            for &(ja, p, r, sign) in &alpha_exc[ia] {
                w[ja * nb + ib] += x * (sign * k[(p, r)]);
            }
            for &(jb, p, r, sign) in &beta_exc[ib] {
                w[ia * nb + jb] += x * (sign * k[(p, r)]);
            }
        }
    }
    w
}

/// `exp(K_hat) v` with `K_hat = sum_{pr,sigma} K_pr a+_{p sigma} a_{r sigma}`.
pub fn apply_orbital_rotation(v: &StateVector, k: &DMatrix<f64>) -> Result<StateVector> {
    check_antisymmetric(k, v.m)?;
    let (na, nb) = v.sector();
    let fro = k.norm();
    if fro == 0.0 {
        return Ok(v.clone());
    }
    let alpha_exc = StateVector::single_excitations(&v.alpha_strings, v.m);
    let beta_exc = StateVector::single_excitations(&v.beta_strings, v.m);
    // ||K_hat|| <= (n_alpha + n_beta) ||K||_F; keep each Taylor step below 1/2
    let bound = (na + nb).max(1) as f64 * fro;
    let steps = (2.0 * bound).ceil().max(1.0) as usize;
    let tau = 1.0 / steps as f64;

    let mut cur = v.amplitudes.clone();
    for _ in 0..steps {
        let mut sum = cur.clone();
        let mut term = cur.clone();
        let scale = sum.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for order in 1..=60 {
            term = apply_one_body(k, &term, &alpha_exc, &beta_exc, &v.alpha_strings, &v.beta_strings);
            let f = tau / order as f64;
            term.iter_mut().for_each(|t| *t *= f);
            let tn = term.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            sum.iter_mut().zip(&term).for_each(|(s, t)| *s += t);
            if tn < EXPM_TOL * 1e-4 * scale {
                break;
            }
        }
        cur = sum;
    }
    Ok(StateVector {
        amplitudes: cur,
        ..v.clone()
    })
}

/// `<x|J_hat|x>` for `J_hat = sum_{k,l} J_kl n_k n_l` over spin orbitals
/// (`k < M` alpha, `k >= M` beta).
pub fn jastrow_exponent(j: &DMatrix<f64>, m: usize, d: &Determinant) -> f64 {
    let occ: Vec<usize> = bits(d.alpha).chain(bits(d.beta).map(|p| p + m)).collect();
    let mut e = 0.0;
    for &k in &occ {
        for &l in &occ {
            e += j[(k, l)];
        }
    }
    e
}

/// `exp(i J_hat) v`.
pub fn apply_jastrow(v: &StateVector, j: &DMatrix<f64>) -> Result<StateVector> {
    let n = 2 * v.m;
    if j.nrows() != n || j.ncols() != n {
        return Err(Error::domain(format!(
            "Jastrow matrix must be {n}x{n}, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    if (j - j.transpose()).amax() > ANTISYMMETRY_TOL {
        return Err(Error::domain("Jastrow matrix is not symmetric"));
    }
    let mut out = v.clone();
    for (i, a) in out.amplitudes.iter_mut().enumerate() {
        if *a == Complex64::default() {
            continue;
        }
        let phase = jastrow_exponent(j, v.m, &v.determinant(i));
        *a *= Complex64::from_polar(1.0, phase);
    }
    Ok(out)
}

/// One `exp(K) exp(iJ) exp(-K)` sandwich.
#[derive(Debug, Clone, PartialEq)]
pub struct LucjLayer {
    pub k: DMatrix<f64>,
    pub j: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LucjParams {
    pub m: usize,
    pub layers: Vec<LucjLayer>,
    /// Trailing rotation applied as `exp(-K_final)`.
    pub k_final: Option<DMatrix<f64>>,
    /// `2M x 2M`; Jastrow entries outside the mask must be zero.
    pub locality_mask: DMatrix<bool>,
}

/// Same-spin-orbital diagonal, same-orbital alpha-beta pairs and
/// nearest-neighbour same-spin pairs.
pub fn default_locality_mask(m: usize) -> DMatrix<bool> {
    let mut mask = DMatrix::from_element(2 * m, 2 * m, false);
    for p in 0..m {
        for (a, b) in [(p, p), (m + p, m + p), (p, m + p)] {
            mask[(a, b)] = true;
            mask[(b, a)] = true;
        }
        if p + 1 < m {
            for (a, b) in [(p, p + 1), (m + p, m + p + 1)] {
                mask[(a, b)] = true;
                mask[(b, a)] = true;
            }
        }
    }
    mask
}

impl LucjParams {
    pub fn validate(&self) -> Result<()> {
        let n = 2 * self.m;
        if self.locality_mask.nrows() != n || self.locality_mask.ncols() != n {
            return Err(Error::domain(format!("locality mask must be {n}x{n}")));
        }
        for (mu, layer) in self.layers.iter().enumerate() {
            check_antisymmetric(&layer.k, self.m)
                .map_err(|e| Error::domain(format!("layer {mu}: {e}")))?;
            if layer.j.nrows() != n || layer.j.ncols() != n {
                return Err(Error::domain(format!("layer {mu}: J must be {n}x{n}")));
            }
            if (&layer.j - layer.j.transpose()).amax() > ANTISYMMETRY_TOL {
                return Err(Error::domain(format!("layer {mu}: J is not symmetric")));
            }
            for r in 0..n {
                for c in 0..n {
                    if !self.locality_mask[(r, c)] && layer.j[(r, c)] != 0.0 {
                        return Err(Error::domain(format!(
                            "layer {mu}: J[{r}][{c}] is outside the locality mask"
                        )));
                    }
                }
            }
        }
        if let Some(k) = &self.k_final {
            check_antisymmetric(k, self.m).map_err(|e| Error::domain(format!("K_final: {e}")))?;
        }
        Ok(())
    }

    /// All-zero parameters with `n_layers` layers and a zero `K_final`.
    pub fn zeros(m: usize, n_layers: usize) -> Self {
        Self {
            m,
            layers: vec![
                LucjLayer {
                    k: DMatrix::zeros(m, m),
                    j: DMatrix::zeros(2 * m, 2 * m),
                };
                n_layers
            ],
            k_final: Some(DMatrix::zeros(m, m)),
            locality_mask: default_locality_mask(m),
        }
    }

    /// Self-contained demo parameters for the 1.5-layer form: random
    /// antisymmetric rotations of size `scale` and a Jastrow factor taken
    /// from the masked Coulomb diagonal `(pp|rr)` times `scale`.
    pub fn perturbative(h: &ActiveSpaceHamiltonian, scale: f64, seed: u64) -> Self {
        let m = h.m_orbitals();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let antisym = |rng: &mut ChaCha8Rng| {
            let mut k = DMatrix::zeros(m, m);
            for p in 0..m {
                for r in 0..p {
                    let x: f64 = rng.sample(StandardNormal);
                    k[(p, r)] = scale * x;
                    k[(r, p)] = -scale * x;
                }
            }
            k
        };
        let k1 = antisym(&mut rng);
        let k2 = antisym(&mut rng);
        let mask = default_locality_mask(m);
        let j = DMatrix::from_fn(2 * m, 2 * m, |a, b| {
            if mask[(a, b)] {
                scale * h.eri(a % m, a % m, b % m, b % m)
            } else {
                0.0
            }
        });
        Self {
            m,
            layers: vec![LucjLayer { k: k1, j }],
            k_final: Some(k2),
            locality_mask: mask,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LucjParamsFile = serde_json::from_str(text)?;
        file.into_params()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let row_major = |a: &DMatrix<f64>| -> Vec<f64> {
            (0..a.nrows())
                .flat_map(|r| (0..a.ncols()).map(move |c| a[(r, c)]))
                .collect()
        };
        let file = LucjParamsFile {
            m: self.m,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    k: row_major(&l.k),
                    j: row_major(&l.j),
                })
                .collect(),
            k_final: self.k_final.as_ref().map(row_major),
            locality_mask: Some(
                (0..2 * self.m)
                    .flat_map(|r| (0..2 * self.m).map(move |c| (r, c)))
                    .map(|rc| self.locality_mask[rc])
                    .collect(),
            ),
        };
        serde_json::to_string_pretty(&file).expect("parameters serialise")
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    #[serde(rename = "K")]
    k: Vec<f64>,
    #[serde(rename = "J")]
    j: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LucjParamsFile {
    m: usize,
    layers: Vec<LayerFile>,
    #[serde(rename = "K_final", default, skip_serializing_if = "Option::is_none")]
    k_final: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    locality_mask: Option<Vec<bool>>,
}

impl LucjParamsFile {
    fn into_params(self) -> Result<LucjParams> {
        let m = self.m;
        if m == 0 || m > 64 {
            return Err(Error::domain(format!("m = {m} outside 1..=64")));
        }
        let square = |v: Vec<f64>, n: usize, what: &str| -> Result<DMatrix<f64>> {
            if v.len() != n * n {
                return Err(Error::domain(format!(
                    "{what} needs {} entries, got {}",
                    n * n,
                    v.len()
                )));
            }
            Ok(DMatrix::from_row_slice(n, n, &v))
        };
        let mut layers = Vec::with_capacity(self.layers.len());
        for (mu, l) in self.layers.into_iter().enumerate() {
            layers.push(LucjLayer {
                k: square(l.k, m, &format!("layers[{mu}].K"))?,
                j: square(l.j, 2 * m, &format!("layers[{mu}].J"))?,
            });
        }
        let k_final = self.k_final.map(|k| square(k, m, "K_final")).transpose()?;
        let locality_mask = match self.locality_mask {
            Some(v) => {
                if v.len() != 4 * m * m {
                    return Err(Error::domain(format!(
                        "locality_mask needs {} entries, got {}",
                        4 * m * m,
                        v.len()
                    )));
                }
                DMatrix::from_row_slice(2 * m, 2 * m, &v)
            }
            None => default_locality_mask(m),
        };
        let params = LucjParams {
            m,
            layers,
            k_final,
            locality_mask,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Applies the layers in list order, each as `exp(K) exp(iJ) exp(-K)`, then
/// `exp(-K_final)`, to the RHF reference of `h`'s sector. One layer plus
/// `K_final` gives `exp(-K2) exp(K1) exp(iJ1) exp(-K1) |RHF>`.
pub fn prepare_lucj(params: &LucjParams, h: &ActiveSpaceHamiltonian) -> Result<StateVector> {
    params.validate()?;
    if params.m != h.m_orbitals() {
        return Err(Error::domain(format!(
            "parameters are for {} orbitals, Hamiltonian has {}",
            params.m,
            h.m_orbitals()
        )));
    }
    let mut v = prepare_rhf(h.m_orbitals(), h.n_alpha(), h.n_beta())?;
    for layer in &params.layers {
        v = apply_orbital_rotation(&v, &(-&layer.k))?;
        v = apply_jastrow(&v, &layer.j)?;
        v = apply_orbital_rotation(&v, &layer.k)?;
    }
    if let Some(k) = &params.k_final {
        v = apply_orbital_rotation(&v, &(-k))?;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhf_states() {
        let v = prepare_rhf(2, 1, 1).unwrap();
        assert_eq!(v.amplitude(&Determinant::from_orbitals(&[0], &[0])), Complex64::new(1.0, 0.0));
        let v = prepare_rhf(4, 2, 2).unwrap();
        assert_eq!(v.amplitude(&Determinant::from_orbitals(&[0, 1], &[0, 1])).re, 1.0);
        assert_eq!(v.norm(), 1.0);
        assert!(matches!(prepare_rhf(4, 2, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_generator_is_identity() {
        let v = prepare_rhf(4, 2, 2).unwrap();
        assert_eq!(apply_orbital_rotation(&v, &DMatrix::zeros(4, 4)).unwrap(), v);
        assert_eq!(apply_jastrow(&v, &DMatrix::zeros(8, 8)).unwrap(), v);
    }

    #[test]
    fn non_antisymmetric_generator_rejected() {
        let v = prepare_rhf(2, 1, 1).unwrap();
        let k = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 0.0]);
        assert!(matches!(apply_orbital_rotation(&v, &k), Err(Error::Domain(_))));
    }

    #[test]
    fn givens_rotation_one_particle() {
        let theta = 0.37;
        let k = DMatrix::from_row_slice(2, 2, &[0.0, theta, -theta, 0.0]);
        let mut v = StateVector::zeros(2, 1, 0).unwrap();
        v.amplitudes[0] = Complex64::new(1.0, 0.0); // alpha orbital 0
        let w = apply_orbital_rotation(&v, &k).unwrap();
        // amplitudes follow c' = exp(K) c
        assert!((w.amplitudes()[0].re - theta.cos()).abs() < 1e-12);
        assert!((w.amplitudes()[1].re + theta.sin()).abs() < 1e-12);
        assert!(w.amplitudes().iter().all(|a| a.im.abs() < 1e-15));
    }

    #[test]
    fn jastrow_is_diagonal_on_single_determinant() {
        let v = prepare_rhf(3, 1, 1).unwrap();
        let mask = default_locality_mask(3);
        let j = DMatrix::from_fn(6, 6, |a, b| if mask[(a, b)] { 0.3 + 0.1 * (a + b) as f64 } else { 0.0 });
        let w = apply_jastrow(&v, &j).unwrap();
        assert_eq!(w.probabilities(), v.probabilities());
    }

    #[test]
    fn default_mask_shape() {
        let mask = default_locality_mask(3);
        assert!(mask[(0, 3)] && mask[(3, 0)] && mask[(0, 1)] && mask[(4, 5)] && mask[(2, 2)]);
        assert!(!mask[(0, 2)] && !mask[(0, 4)] && !mask[(2, 3)]);
        assert_eq!(mask, mask.transpose());
    }

    #[test]
    fn all_zero_params_give_rhf() {
        let h = crate::toy::random_hamiltonian(4, 2, 2, 1).unwrap();
        let v = prepare_lucj(&LucjParams::zeros(4, 1), &h).unwrap();
        assert_eq!(v, prepare_rhf(4, 2, 2).unwrap());
    }

    #[test]
    fn params_json_round_trip_and_validation() {
        let h = crate::toy::random_hamiltonian(3, 1, 1, 4).unwrap();
        let p = LucjParams::perturbative(&h, 0.2, 9);
        p.validate().unwrap();
        assert_eq!(LucjParams::from_json(&p.to_json()).unwrap(), p);

        let bad_mask = r#"{"m":1,"layers":[{"K":[0.0],"J":[0,1,1,0]}],"locality_mask":[true,false,false,true]}"#;
        assert!(LucjParams::from_json(bad_mask).is_err());
        let wrong_len = r#"{"m":2,"layers":[{"K":[0.0],"J":[0]}]}"#;
        assert!(LucjParams::from_json(wrong_len).is_err());
        let ok = r#"{"m":1,"layers":[{"K":[0.0],"J":[0.5,0.1,0.1,0.0]}]}"#;
        assert_eq!(LucjParams::from_json(ok).unwrap().layers.len(), 1);
    }
}
