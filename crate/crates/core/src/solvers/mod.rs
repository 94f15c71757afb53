//! Preconditioned conjugate gradient and the preconditioners it is
//! benchmarked with.

mod ic;
mod pcg;
mod precond;

pub use ic::{ic_droptol, IcFactor};
pub use pcg::{cg_unpreconditioned, pcg, pcg_observed, CgReport, DEFAULT_TOL};
pub use precond::{jacobi_precond, spai_precond, PrecondKind, Preconditioner};

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
