//! Linear extrapolation of subspace energies to zero Hamiltonian variance.
//!
//! The abscissa is the relative variance `x = dH / E^2`; the fitted line
//! `E = intercept + slope * x` is evaluated at `x = 0`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::HARTREE_TO_KCAL_MOL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    /// `dH / E^2`.
    pub x: f64,
    /// Variational energy (hartree).
    pub e: f64,
    pub batch_size: usize,
    /// Uncertainty of `e`, used only by inverse-variance weighting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl VariancePoint {
    pub fn new(energy: f64, variance: f64, batch_size: usize) -> Self {
        Self {
            x: variance / (energy * energy),
            e: energy,
            batch_size,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Equal,
    /// Weights `1 / sigma^2`; every point must carry `sigma > 0`.
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Energy at zero variance (hartree).
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the intercept from the least-squares covariance.
    pub intercept_stderr: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Set when only two points were fitted, leaving no residual degrees of
    /// freedom; the standard error is then reported as 0.
    pub dof_warning: bool,
    pub weighting: Weighting,
}

/// Weighted least-squares line through the points.
pub fn fit_zero_variance(points: &[VariancePoint], weighting: Weighting) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::domain("a linear fit needs at least two points"));
    }
    for p in points {
        if !p.x.is_finite() || !p.e.is_finite() || p.x < 0.0 {
            return Err(Error::domain(format!("invalid point (x = {}, e = {})", p.x, p.e)));
        }
    }
    let w: Vec<f64> = match weighting {
        Weighting::Equal => vec![1.0; points.len()],
        Weighting::InverseVariance => points
            .iter()
            .map(|p| match p.sigma {
                Some(s) if s > 0.0 && s.is_finite() => Ok(1.0 / (s * s)),
                _ => Err(Error::domain("inverse-variance weighting needs sigma > 0 on every point")),
            })
            .collect::<Result<_>>()?,
    };
    if points.iter().all(|p| p.x == points[0].x) {
        return Err(Error::SingularFit("all points share the same abscissa".into()));
    }
    let sw: f64 = w.iter().sum();
    let xm = points.iter().zip(&w).map(|(p, w)| w * p.x).sum::<f64>() / sw;
    let ym = points.iter().zip(&w).map(|(p, w)| w * p.e).sum::<f64>() / sw;
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.x - xm).powi(2)).sum();
    let sxy: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.x - xm) * (p.e - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::SingularFit("abscissae are numerically indistinct".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.e - intercept - slope * p.x).powi(2))
        .sum();
    let ss_tot: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.e - ym).powi(2)).sum();
    let n = points.len();
    let dof_warning = n == 2;
    let intercept_stderr = if dof_warning {
        0.0
    } else {
        let s2 = ss_res / (n - 2) as f64;
        (s2 * (1.0 / sw + xm * xm / sxx)).sqrt()
    };
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FitResult {
        intercept,
        slope,
        intercept_stderr,
        r_squared,
        n_points: n,
        dof_warning,
        weighting,
    })
}

/// Binding energy and its propagated error (kcal/mol) from two independent
/// extrapolations.
pub fn extrapolate_binding(bound: &FitResult, unbound: &FitResult) -> (f64, f64) {
    (
        (bound.intercept - unbound.intercept) * HARTREE_TO_KCAL_MOL,
        bound.intercept_stderr.hypot(unbound.intercept_stderr) * HARTREE_TO_KCAL_MOL,
    )
}

/// Parses a JSONL variance log (one point per line; blank lines and lines
/// starting with `#` are skipped; unknown fields are ignored).
pub fn read_variance_log(text: &str) -> Result<Vec<VariancePoint>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p: VariancePoint =
            serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

pub fn read_variance_log_file(path: impl AsRef<Path>) -> Result<Vec<VariancePoint>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_variance_log(&text)
}

/// Keeps the lowest-energy point per batch size; with `batch_sizes` given,
/// exactly those sizes are selected (in ascending order) and each must be
/// present.
pub fn select_points(points: &[VariancePoint], batch_sizes: Option<&[usize]>) -> Result<Vec<VariancePoint>> {
    let mut best: BTreeMap<usize, VariancePoint> = BTreeMap::new();
    for p in points {
        best.entry(p.batch_size)
            .and_modify(|q| {
                if p.e < q.e {
                    *q = *p;
                }
            })
            .or_insert(*p);
    }
    match batch_sizes {
        None => Ok(best.into_values().collect()),
        Some(sizes) => {
            let mut sizes = sizes.to_vec();
            sizes.sort_unstable();
            sizes.dedup();
            sizes
                .iter()
                .map(|b| {
                    best.get(b)
                        .copied()
                        .ok_or_else(|| Error::config(format!("no log entry for batch size {b}")))
                })
                .collect()
        }
    }
}
