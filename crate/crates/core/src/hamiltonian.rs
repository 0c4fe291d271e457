//! Active-space electronic Hamiltonian and FCIDUMP exchange.
//!
//! The Hamiltonian is stored densely: `h_one` is `M x M`, `eri` is `M^4`
//! in chemists' notation `(pr|qs)`. Symmetry is completed on insertion by
//! copying, so every permutation of an element holds a bitwise-identical value.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Largest orbital count representable by the 64-bit spin-string masks.
pub const MAX_ORBITALS: usize = 64;

/// Values at or below this magnitude are not emitted by [`write_fcidump`].
pub const WRITE_THRESHOLD: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSpaceHamiltonian {
    m: usize,
    n_alpha: usize,
    n_beta: usize,
    e_core: f64,
    h_one: Vec<f64>,
    eri: Vec<f64>,
}

impl ActiveSpaceHamiltonian {
    /// A Hamiltonian with every integral zero.
    pub fn zeros(m: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if m == 0 || m > MAX_ORBITALS {
            return Err(Error::Unsupported(format!(
                "orbital count {m} outside 1..={MAX_ORBITALS}"
            )));
        }
        if n_alpha > m || n_beta > m {
            return Err(Error::domain(format!(
                "electron counts ({n_alpha}, {n_beta}) exceed {m} orbitals"
            )));
        }
        Ok(Self {
            m,
            n_alpha,
            n_beta,
            e_core: 0.0,
            h_one: vec![0.0; m * m],
            eri: vec![0.0; m * m * m * m],
        })
    }

    /// Builds from dense arrays, checking the symmetry invariants exactly.
    pub fn from_dense(
        m: usize,
        n_alpha: usize,
        n_beta: usize,
        e_core: f64,
        h_one: Vec<f64>,
        eri: Vec<f64>,
    ) -> Result<Self> {
        let mut h = Self::zeros(m, n_alpha, n_beta)?;
        if h_one.len() != m * m || eri.len() != m * m * m * m {
            return Err(Error::domain("integral array sizes do not match M"));
        }
        h.e_core = e_core;
        h.h_one = h_one;
        h.eri = eri;
        if !h.is_symmetric() {
            return Err(Error::domain(
                "integrals violate the h_pr = h_rp or 8-fold (pr|qs) symmetry",
            ));
        }
        Ok(h)
    }

    pub fn m_orbitals(&self) -> usize {
        self.m
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn sector(&self) -> (usize, usize) {
        (self.n_alpha, self.n_beta)
    }

    pub fn e_core(&self) -> f64 {
        self.e_core
    }

    pub fn set_e_core(&mut self, e: f64) {
        self.e_core = e;
    }

    /// Overrides the electron counts (the integrals are sector independent).
    pub fn with_sector(mut self, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_alpha > self.m || n_beta > self.m {
            return Err(Error::domain(format!(
                "electron counts ({n_alpha}, {n_beta}) exceed {} orbitals",
                self.m
            )));
        }
        self.n_alpha = n_alpha;
        self.n_beta = n_beta;
        Ok(self)
    }

    #[inline]
    pub fn h_one(&self, p: usize, r: usize) -> f64 {
        self.h_one[p * self.m + r]
    }

    #[inline]
    fn eri_index(&self, p: usize, r: usize, q: usize, s: usize) -> usize {
        ((p * self.m + r) * self.m + q) * self.m + s
    }

    /// `(pr|qs)`.
    #[inline]
    pub fn eri(&self, p: usize, r: usize, q: usize, s: usize) -> f64 {
        self.eri[self.eri_index(p, r, q, s)]
    }

    pub fn h_one_slice(&self) -> &[f64] {
        &self.h_one
    }

    pub fn eri_slice(&self) -> &[f64] {
        &self.eri
    }

    /// Sets `h_pr` and `h_rp`.
    pub fn set_h_one(&mut self, p: usize, r: usize, value: f64) {
        let m = self.m;
        self.h_one[p * m + r] = value;
        self.h_one[r * m + p] = value;
    }

    /// Sets all eight permutations of `(pr|qs)`.
    pub fn set_eri(&mut self, p: usize, r: usize, q: usize, s: usize, value: f64) {
        for (a, b, c, d) in eri_permutations(p, r, q, s) {
            let idx = self.eri_index(a, b, c, d);
            self.eri[idx] = value;
        }
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.m;
        for p in 0..m {
            for r in 0..m {
                if self.h_one(p, r) != self.h_one(r, p) {
                    return false;
                }
                for q in 0..m {
                    for s in 0..m {
                        let v = self.eri(p, r, q, s);
                        if eri_permutations(p, r, q, s)
                            .into_iter()
                            .any(|(a, b, c, d)| self.eri(a, b, c, d) != v)
                        {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

fn eri_permutations(p: usize, r: usize, q: usize, s: usize) -> [(usize, usize, usize, usize); 8] {
    [
        (p, r, q, s),
        (r, p, q, s),
        (p, r, s, q),
        (r, p, s, q),
        (q, s, p, r),
        (s, q, p, r),
        (q, s, r, p),
        (s, q, r, p),
    ]
}

/// Result of [`parse_fcidump`].
#[derive(Debug, Clone, PartialEq)]
pub struct Fcidump {
    pub hamiltonian: ActiveSpaceHamiltonian,
    /// Set when the file had no `0 0 0 0` line; `e_core` is then 0.
    pub core_energy_missing: bool,
}

struct Header {
    norb: i64,
    nelec: i64,
    ms2: i64,
    /// 1-based line number of the first data line.
    data_start: usize,
}

fn parse_header(lines: &[&str]) -> Result<Header> {
    let first = lines
        .iter()
        .position(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::parse(1, "empty FCIDUMP"))?;
    if !lines[first].trim_start().to_ascii_uppercase().starts_with("&FCI") {
        return Err(Error::parse(first + 1, "expected '&FCI' header"));
    }
    let mut text = String::new();
    let mut end = None;
    for (i, line) in lines.iter().enumerate().skip(first) {
        let upper = line.to_ascii_uppercase();
        if let Some(pos) = upper.find("&END") {
            text.push_str(&upper[..pos]);
            end = Some(i);
            break;
        }
        if upper.trim() == "/" {
            end = Some(i);
            break;
        }
        text.push_str(&upper);
        text.push(' ');
    }
    let end = end.ok_or_else(|| Error::parse(first + 1, "header is not terminated by &END or /"))?;
    let text = text.replacen("&FCI", " ", 1).replace('=', " = ").replace(',', " ");
    let tokens: Vec<&str> = text.split_whitespace().collect();

    let mut norb = None;
    let mut nelec = None;
    let mut ms2 = 0i64;
    let mut i = 0;
    while i < tokens.len() {
        if tokens.get(i + 1) != Some(&"=") {
            return Err(Error::parse(first + 1, format!("unexpected header token '{}'", tokens[i])));
        }
        let key = tokens[i];
        i += 2;
        let mut values = Vec::new();
        while i < tokens.len() && tokens.get(i + 1) != Some(&"=") {
            values.push(tokens[i]);
            i += 1;
        }
        let scalar = |values: &[&str]| -> Result<i64> {
            match values {
                [v] => v
                    .parse::<i64>()
                    .map_err(|_| Error::parse(first + 1, format!("{key}: '{v}' is not an integer"))),
                _ => Err(Error::parse(first + 1, format!("{key} expects one value"))),
            }
        };
        match key {
            "NORB" => norb = Some(scalar(&values)?),
            "NELEC" => nelec = Some(scalar(&values)?),
            "MS2" => ms2 = scalar(&values)?,
            // ORBSYM, ISYM, UHF and friends carry no information we use.
            _ => {}
        }
    }
    let norb = norb.ok_or_else(|| Error::parse(first + 1, "header lacks NORB"))?;
    let nelec = nelec.ok_or_else(|| Error::parse(first + 1, "header lacks NELEC"))?;
    Ok(Header {
        norb,
        nelec,
        ms2,
        data_start: end + 2,
    })
}

fn parse_value(field: &str) -> Option<f64> {
    let v: f64 = if field.contains(['d', 'D']) {
        field.replace(['d', 'D'], "e").parse().ok()?
    } else {
        field.parse().ok()?
    };
    v.is_finite().then_some(v)
}

/// Parses FCIDUMP text into a Hamiltonian.
pub fn parse_fcidump(text: &str) -> Result<Fcidump> {
    let lines: Vec<&str> = text.lines().collect();
    let header = parse_header(&lines)?;
    let hline = header.data_start.saturating_sub(1);
    if header.norb < 1 || header.norb as usize > MAX_ORBITALS {
        return Err(Error::Unsupported(format!(
            "NORB={} outside 1..={MAX_ORBITALS}",
            header.norb
        )));
    }
    if header.nelec < 0 || (header.nelec + header.ms2) % 2 != 0 || header.ms2.abs() > header.nelec {
        return Err(Error::parse(
            hline,
            format!("inconsistent NELEC={} MS2={}", header.nelec, header.ms2),
        ));
    }
    let m = header.norb as usize;
    let n_alpha = ((header.nelec + header.ms2) / 2) as usize;
    let n_beta = ((header.nelec - header.ms2) / 2) as usize;
    let mut h = ActiveSpaceHamiltonian::zeros(m, n_alpha, n_beta)
        .map_err(|e| Error::parse(hline, e.to_string()))?;

    let mut core_seen = false;
    for (offset, raw) in lines.iter().enumerate().skip(header.data_start - 1) {
        let lineno = offset + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::parse(lineno, format!("expected 5 fields, found {}", fields.len())));
        }
        let value = parse_value(fields[0])
            .ok_or_else(|| Error::parse(lineno, format!("bad value '{}'", fields[0])))?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            let i: i64 = f
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad index '{f}'")))?;
            if i < 0 || i > header.norb {
                return Err(Error::IndexRange {
                    line: lineno,
                    index: i,
                    norb: m,
                });
            }
            *slot = i as usize;
        }
        match idx {
            [0, 0, 0, 0] => {
                h.e_core = value;
                core_seen = true;
            }
            [_, 0, 0, 0] => {}
            [i, j, 0, 0] if j > 0 => h.set_h_one(i - 1, j - 1, value),
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                h.set_eri(i - 1, j - 1, k - 1, l - 1, value)
            }
            _ => {
                return Err(Error::parse(
                    lineno,
                    format!("unrecognised index pattern {idx:?}"),
                ))
            }
        }
    }
    if !core_seen {
        log::warn!("FCIDUMP has no core-energy line; E0 set to 0");
    }
    Ok(Fcidump {
        hamiltonian: h,
        core_energy_missing: !core_seen,
    })
}

pub fn read_fcidump(path: impl AsRef<Path>) -> Result<Fcidump> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fcidump(&text)
}

/// Serialises the symmetry-unique nonzero elements.
///
/// Sections follow the usual layout (two-body, one-body, core line). Within a
/// section lines are sorted lexicographically on the canonical 1-based index
/// tuple: `i >= j`, `k >= l`, `(i, j) >= (k, l)`.
pub fn write_fcidump(h: &ActiveSpaceHamiltonian) -> String {
    let m = h.m;
    let mut out = String::new();
    let orbsym = vec!["1"; m].join(",");
    let _ = writeln!(
        out,
        "&FCI NORB={},NELEC={},MS2={},\n  ORBSYM={},\n  ISYM=1,\n&END",
        m,
        h.n_alpha + h.n_beta,
        h.n_alpha as i64 - h.n_beta as i64,
        orbsym
    );
    for i in 1..=m {
        for j in 1..=i {
            for k in 1..=i {
                let lmax = if k == i { j } else { k };
                for l in 1..=lmax {
                    let v = h.eri(i - 1, j - 1, k - 1, l - 1);
                    if v.abs() > WRITE_THRESHOLD {
                        let _ = writeln!(out, "{v:?} {i} {j} {k} {l}");
                    }
                }
            }
        }
    }
    for i in 1..=m {
        for j in 1..=i {
            let v = h.h_one(i - 1, j - 1);
            if v.abs() > WRITE_THRESHOLD {
                let _ = writeln!(out, "{v:?} {i} {j} 0 0");
            }
        }
    }
    let _ = writeln!(out, "{:?} 0 0 0 0", h.e_core);
    out
}
