//! Emulated device sampling and the shot-file format.
//!
//! Shot files are UTF-8 text, one bitstring per line with an optional
//! repetition count; `#` starts a comment line. Character `k` of a bitstring
//! is alpha orbital `k` for `k < M` and beta orbital `k - M` otherwise.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::ansatz::StateVector;
use crate::error::{Error, Result};
use crate::fock::Determinant;

/// Upper bound on shots held in memory (also bounds parser allocations).
pub const MAX_SHOTS: usize = 20_000_000;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Independent per-bit flip probability.
    #[serde(default = "NoiseSpec::default_p")]
    pub flip_probability: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    fn default_p() -> f64 {
        0.01
    }

    pub fn noiseless(seed: u64) -> Self {
        Self {
            flip_probability: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::domain(format!(
                "flip probability {} outside [0, 1]",
                self.flip_probability
            )));
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            flip_probability: Self::default_p(),
            seed: 0,
        }
    }
}

/// Raw measurement outcomes; particle numbers are unconstrained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotSet {
    pub m: usize,
    pub shots: Vec<Determinant>,
}

impl ShotSet {
    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    /// Shots carrying exactly the given particle numbers.
    pub fn in_sector(&self, sector: (usize, usize)) -> impl Iterator<Item = &Determinant> {
        self.shots
            .iter()
            .filter(move |d| d.particle_numbers() == sector)
    }

    pub fn counts(&self) -> BTreeMap<Determinant, usize> {
        let mut out = BTreeMap::new();
        for d in &self.shots {
            *out.entry(*d).or_insert(0) += 1;
        }
        out
    }
}

/// Draws `n_shots` determinants from `|<x|psi>|^2` with an alias table, then
/// flips each of the `2M` bits independently with the noise probability.
pub fn sample(v: &StateVector, n_shots: usize, noise: &NoiseSpec) -> Result<ShotSet> {
    noise.validate()?;
    if n_shots == 0 {
        return Err(Error::domain("n_shots must be at least 1"));
    }
    if n_shots > MAX_SHOTS {
        return Err(Error::Size {
            what: "shot set",
            requested: n_shots,
            cap: MAX_SHOTS,
        });
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::domain(format!("state is not normalized (norm {norm})")));
    }
    let alias = WeightedAliasIndex::new(v.probabilities())
        .map_err(|e| Error::domain(format!("cannot build sampling table: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let m = v.m_orbitals();
    let p = noise.flip_probability;
    let mut shots = Vec::with_capacity(n_shots);
    for _ in 0..n_shots {
        let mut d = v.determinant(alias.sample(&mut rng));
        if p > 0.0 {
            for k in 0..m {
                if rng.random_bool(p) {
                    d.alpha ^= 1u64 << k;
                }
            }
            for k in 0..m {
                if rng.random_bool(p) {
                    d.beta ^= 1u64 << k;
                }
            }
        }
        shots.push(d);
    }
    Ok(ShotSet { m, shots })
}

fn parse_bits(field: &str, m: usize, line: usize) -> Result<Determinant> {
    let mut d = Determinant::default();
    for (k, c) in field.bytes().enumerate() {
        let bit = match c {
            b'0' => 0u64,
            b'1' => 1u64,
            _ => {
                return Err(Error::parse(
                    line,
                    format!("invalid character {:?} in bitstring", c as char),
                ))
            }
        };
        if k < m {
            d.alpha |= bit << k;
        } else {
            d.beta |= bit << (k - m);
        }
    }
    Ok(d)
}

/// Parses a shot file. `m` fixes the orbital count; when `None` it is taken
/// from the first bitstring.
pub fn read_shots(text: &str, m: Option<usize>) -> Result<ShotSet> {
    let mut m = m;
    if let Some(m) = m {
        if m == 0 || m > 64 {
            return Err(Error::domain(format!("orbital count {m} outside 1..=64")));
        }
    }
    let mut shots = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let bits = fields.next().unwrap_or_default();
        let count = match fields.next() {
            Some(c) => c
                .parse::<usize>()
                .ok()
                .filter(|&c| c > 0)
                .ok_or_else(|| Error::parse(lineno, format!("bad repetition count '{c}'")))?,
            None => 1,
        };
        if fields.next().is_some() {
            return Err(Error::parse(lineno, "expected a bitstring and an optional count"));
        }
        let mm = match m {
            Some(mm) => mm,
            None => {
                if bits.len() % 2 != 0 || bits.is_empty() || bits.len() > 128 {
                    return Err(Error::parse(
                        lineno,
                        format!("bitstring length {} is not 2M for M in 1..=64", bits.len()),
                    ));
                }
                m = Some(bits.len() / 2);
                bits.len() / 2
            }
        };
        if bits.len() != 2 * mm {
            return Err(Error::parse(
                lineno,
                format!("bitstring length {} != 2M = {}", bits.len(), 2 * mm),
            ));
        }
        let d = parse_bits(bits, mm, lineno)?;
        if shots.len() + count > MAX_SHOTS {
            return Err(Error::Size {
                what: "shot set",
                requested: shots.len().saturating_add(count),
                cap: MAX_SHOTS,
            });
        }
        shots.extend(std::iter::repeat_n(d, count));
    }
    let m = m.ok_or_else(|| Error::parse(1, "no bitstrings and no orbital count given"))?;
    Ok(ShotSet { m, shots })
}

pub fn read_shots_file(path: impl AsRef<Path>, m: Option<usize>) -> Result<ShotSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_shots(&text, m)
}

pub fn format_bits(d: &Determinant, m: usize) -> String {
    let mut s = String::with_capacity(2 * m);
    for k in 0..m {
        s.push(if d.alpha >> k & 1 == 1 { '1' } else { '0' });
    }
    for k in 0..m {
        s.push(if d.beta >> k & 1 == 1 { '1' } else { '0' });
    }
    s
}

/// Serialises shots in order, collapsing runs of identical shots into one
/// counted line, so `read_shots(write_shots(s))` reproduces `s` exactly.
pub fn write_shots(s: &ShotSet) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < s.shots.len() {
        let d = s.shots[i];
        let run = s.shots[i..].iter().take_while(|x| **x == d).count();
        let bits = format_bits(&d, s.m);
        if run == 1 {
            let _ = writeln!(out, "{bits}");
        } else {
            let _ = writeln!(out, "{bits} {run}");
        }
        i += run;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::prepare_rhf;

    #[test]
    fn bit_order_convention() {
        let s = read_shots("1100\n", Some(2)).unwrap();
        assert_eq!(s.shots, vec![Determinant::from_orbitals(&[0, 1], &[])]);
        let s = read_shots("# comment\n0011 5\n\n", None).unwrap();
        assert_eq!(s.m, 2);
        assert_eq!(s.shots, vec![Determinant::from_orbitals(&[], &[0, 1]); 5]);
        assert_eq!(format_bits(&Determinant::from_orbitals(&[1], &[0]), 3), "010100");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(read_shots("1100\n110\n", None), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_shots("1100\n11x0\n", None), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_shots("# c\n1100 0\n", None), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_shots("1100 2 3\n", None), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_shots("111\n", None), Err(Error::Parse { line: 1, .. })));
        assert!(read_shots("", None).is_err());
        assert_eq!(read_shots("", Some(3)).unwrap().len(), 0);
        assert!(matches!(read_shots("10 99999999999\n", None), Err(Error::Size { .. })));
    }

    #[test]
    fn noiseless_single_determinant() {
        let v = prepare_rhf(3, 1, 1).unwrap();
        let s = sample(&v, 100, &NoiseSpec::noiseless(4)).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.shots.iter().all(|d| *d == Determinant::aufbau(1, 1)));
    }

    #[test]
    fn sampling_is_reproducible() {
        let v = prepare_rhf(4, 2, 2).unwrap();
        let noise = NoiseSpec { flip_probability: 0.2, seed: 11 };
        assert_eq!(sample(&v, 500, &noise).unwrap(), sample(&v, 500, &noise).unwrap());
        let other = NoiseSpec { seed: 12, ..noise };
        assert_ne!(sample(&v, 500, &noise).unwrap(), sample(&v, 500, &other).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let v = prepare_rhf(2, 1, 1).unwrap();
        assert!(sample(&v, 0, &NoiseSpec::default()).is_err());
        let bad = NoiseSpec { flip_probability: 1.5, seed: 0 };
        assert!(sample(&v, 1, &bad).is_err());
        let unnormalized = StateVector::zeros(2, 1, 1).unwrap();
        assert!(matches!(sample(&unnormalized, 1, &NoiseSpec::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn write_collapses_runs() {
        let d1 = Determinant::from_orbitals(&[0], &[1]);
        let d2 = Determinant::from_orbitals(&[1], &[1]);
        let s = ShotSet { m: 2, shots: vec![d1, d1, d2, d1] };
        assert_eq!(write_shots(&s), "1001 2\n0101\n1001\n");
        assert_eq!(read_shots(&write_shots(&s), None).unwrap(), s);
    }
}
