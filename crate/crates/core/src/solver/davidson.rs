use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::operator::LinearOperator;

#[derive(Debug, Clone, Copy)]
pub struct DavidsonParams {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub max_space: usize,
}

#[derive(Debug, Clone)]
pub struct DavidsonOutcome {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Orthogonalizes `t` against `basis` (two Gram–Schmidt passes) and
/// normalizes it. Returns `false` when nothing independent remains.
fn orthonormalize(t: &mut [f64], basis: &[Vec<f64>]) -> bool {
    let n0 = dot(t, t).sqrt();
    if n0 == 0.0 || !n0.is_finite() {
        return false;
    }
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, t);
            axpy(-c, v, t);
        }
    }
    let n = dot(t, t).sqrt();
    if n < 1e-10 * n0 || n < 1e-300 {
        return false;
    }
    t.iter_mut().for_each(|x| *x /= n);
    true
}

/// Starting vector: the lowest-diagonal basis state with a small
/// deterministic admixture of every other state, so that the search is not
/// confined to the symmetry block of a single determinant.
fn default_guess(diagonal: &[f64]) -> Vec<f64> {
    let n = diagonal.len();
    let k = diagonal
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let norm = dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v *= 1e-2 / norm);
    x[k] += 1.0;
    x
}

/// Lowest eigenpair of a symmetric operator by diagonally preconditioned
/// Davidson iteration with restarts.
pub fn lowest_eigenpair(
    op: &dyn LinearOperator,
    params: &DavidsonParams,
    guess: Option<Vec<f64>>,
) -> Result<DavidsonOutcome> {
    let n = op.dim();
    let diag = op.diagonal();
    if n == 0 {
        return Err(Error::domain("cannot diagonalize an empty space"));
    }
    if n == 1 {
        return Ok(DavidsonOutcome {
            value: diag[0],
            vector: vec![1.0],
            residual: 0.0,
            iterations: 0,
        });
    }
    let max_space = params.max_space.clamp(2, n);

    let mut x0 = match guess {
        Some(g) if g.len() == n && dot(&g, &g) > 0.0 => g,
        _ => default_guess(diag),
    };
    if !orthonormalize(&mut x0, &[]) {
        x0 = default_guess(diag);
        orthonormalize(&mut x0, &[]);
    }

    let mut v: Vec<Vec<f64>> = Vec::with_capacity(max_space);
    let mut av: Vec<Vec<f64>> = Vec::with_capacity(max_space);
    let mut g = DMatrix::<f64>::zeros(max_space, max_space);
    let push = |t: Vec<f64>, v: &mut Vec<Vec<f64>>, av: &mut Vec<Vec<f64>>, g: &mut DMatrix<f64>| {
        let mut at = vec![0.0; n];
        op.apply(&t, &mut at);
        let k = v.len();
        for (i, vi) in v.iter().enumerate() {
            let gij = dot(vi, &at);
            g[(i, k)] = gij;
            g[(k, i)] = gij;
        }
        g[(k, k)] = dot(&t, &at);
        v.push(t);
        av.push(at);
    };
    push(x0, &mut v, &mut av, &mut g);

    let mut best_residual = f64::INFINITY;
    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    for iter in 1..=params.max_iterations {
        let k = v.len();
        let eig = SymmetricEigen::new(g.view((0, 0), (k, k)).into_owned());
        let j = eig.eigenvalues.imin();
        let theta = eig.eigenvalues[j];
        let y = eig.eigenvectors.column(j);

        x.iter_mut().for_each(|e| *e = 0.0);
        ax.iter_mut().for_each(|e| *e = 0.0);
        for i in 0..k {
            axpy(y[i], &v[i], &mut x);
            axpy(y[i], &av[i], &mut ax);
        }
        for i in 0..n {
            r[i] = ax[i] - theta * x[i];
        }
        let rnorm = dot(&r, &r).sqrt();
        best_residual = best_residual.min(rnorm);
        if rnorm < params.tolerance || k == n {
            let norm = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|e| *e /= norm);
            return Ok(DavidsonOutcome {
                value: theta,
                vector: x,
                residual: rnorm,
                iterations: iter,
            });
        }

        if k >= max_space {
            let mut xs = x.clone();
            orthonormalize(&mut xs, &[]);
            v.clear();
            av.clear();
            push(xs, &mut v, &mut av, &mut g);
        }

        let mut t: Vec<f64> = r
            .iter()
            .zip(diag)
            .map(|(ri, di)| {
                let den = di - theta;
                let den = if den.abs() < 1e-8 { 1e-8f64.copysign(den) } else { den };
                ri / den
            })
            .collect();
        if !orthonormalize(&mut t, &v) {
            t.clone_from(&r);
            if !orthonormalize(&mut t, &v) {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    best_residual,
                });
            }
        }
        push(t, &mut v, &mut av, &mut g);
    }
    Err(Error::NoConvergence {
        iterations: params.max_iterations,
        best_residual,
    })
}
