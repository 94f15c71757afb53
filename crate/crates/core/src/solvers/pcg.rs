use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::precond::Preconditioner;
use super::{dot, norm2};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Relative residual tolerance used by the benchmarks.
pub const DEFAULT_TOL: f64 = 1.0e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    pub converged: bool,
    /// `‖r_k‖ / ‖b‖` for `k = 0..=iterations`; entry 0 is the initial guess.
    pub rel_residuals: Vec<f64>,
    pub wall_seconds: f64,
}

fn check(a: &CsrMatrix, b: &[f64], n_p: usize, tol: f64) -> Result<()> {
    if !a.is_square() || a.n_rows() != b.len() || n_p != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "pcg: A is {}x{}, b has {} entries, P has size {n_p}",
            a.n_rows(),
            a.n_cols(),
            b.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Preconditioned conjugate gradient from `x₀ = 0`, stopping when
/// `‖r‖₂ / ‖b‖₂ ≤ tol` or after `max_iter` iterations.
pub fn pcg(a: &CsrMatrix, b: &[f64], p: &Preconditioner, tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgReport)> {
    pcg_observed(a, b, p, tol, max_iter, |_, _| {})
}

/// [`pcg`] calling `observer(k, x_k)` after every iteration.
pub fn pcg_observed(
    a: &CsrMatrix,
    b: &[f64],
    p: &Preconditioner,
    tol: f64,
    max_iter: usize,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, CgReport)> {
    check(a, b, p.dim(), tol)?;
    let start = Instant::now();
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut report = CgReport {
        iterations: 0,
        converged: false,
        rel_residuals: Vec::new(),
        wall_seconds: 0.0,
    };
    if bnorm == 0.0 {
        report.converged = true;
        report.rel_residuals.push(0.0);
        return Ok((x, report));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    p.apply_into(&r, &mut z);
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    report.rel_residuals.push(1.0);

    for k in 1..=max_iter {
        a.spmv_into(&dir, &mut ap);
        let pap = dot(&dir, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown(format!(
                "pᵀAp = {pap:e} at iteration {k}: A or P is not positive definite"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * dir[i];
            r[i] -= alpha * ap[i];
        }
        report.iterations = k;
        let rel = norm2(&r) / bnorm;
        report.rel_residuals.push(rel);
        observer(k, &x);
        if rel <= tol {
            report.converged = true;
            break;
        }
        p.apply_into(&r, &mut z);
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0) {
            return Err(Error::Breakdown(format!(
                "rᵀPr = {rz_new:e} at iteration {k}: P is not positive definite"
            )));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            dir[i] = z[i] + beta * dir[i];
        }
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Textbook conjugate gradient without a preconditioner.
pub fn cg_unpreconditioned(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, CgReport)> {
    check(a, b, b.len(), tol)?;
    let start = Instant::now();
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut dir = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    let mut report = CgReport {
        iterations: 0,
        converged: bnorm == 0.0,
        rel_residuals: vec![if bnorm == 0.0 { 0.0 } else { 1.0 }],
        wall_seconds: 0.0,
    };
    if bnorm == 0.0 {
        return Ok((x, report));
    }
    for k in 1..=max_iter {
        a.spmv_into(&dir, &mut ap);
        let pap = dot(&dir, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown(format!("pᵀAp = {pap:e} at iteration {k}")));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * dir[i];
            r[i] -= alpha * ap[i];
        }
        report.iterations = k;
        let rel = norm2(&r) / bnorm;
        report.rel_residuals.push(rel);
        observer(k, &x);
        if rel <= tol {
            report.converged = true;
            break;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            dir[i] = r[i] + beta * dir[i];
        }
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}
