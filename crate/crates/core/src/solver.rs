//! Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub method: SolveMethod,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` to `‖b - A x‖ ≤ tol ‖b‖`; `max_iter` defaults to `50 n`.
pub fn solve_spd(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: Option<usize>) -> Result<(Vec<f64>, SolveReport)> {
    solve_spd_monitored(a, b, tol, max_iter, |_, _| {})
}

/// As [`solve_spd`], calling `monitor(iteration, x)` after every update.
pub fn solve_spd_monitored(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: Option<usize>,
    mut monitor: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    if a.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("matrix {:?} with right-hand side of length {n}", a.shape())));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("right-hand side is not finite".into()));
    }
    let max_iter = max_iter.unwrap_or(50 * n.max(1));
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    let report = |iterations, res: f64| SolveReport {
        iterations,
        relative_residual: if b_norm > 0.0 { res / b_norm } else { 0.0 },
        method: SolveMethod::ConjugateGradient,
    };
    if b_norm == 0.0 {
        return Ok((x, report(0, 0.0)));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = b_norm;
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NonConvergence { iterations: it, residual: res / b_norm });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        monitor(it, &x);
        res = dot(&r, &r).sqrt();
        if res <= tol * b_norm {
            // confirm with the true residual
            let ax = a.mul_vec(&x)?;
            let true_res = b.iter().zip(&ax).map(|(b, y)| (b - y).powi(2)).sum::<f64>().sqrt();
            if true_res <= tol * b_norm {
                return Ok((x, report(it, true_res)));
            }
            r = b.iter().zip(&ax).map(|(b, y)| b - y).collect();
            res = true_res;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: res / b_norm })
}
