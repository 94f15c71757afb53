use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::solvers::Preconditioner;
use crate::sparse::CsrMatrix;

/// Largest dimension handled by the dense eigensolver in [`condition_number`].
pub const DENSE_CONDITION_LIMIT: usize = 2000;

/// Label attached to preconditioned condition numbers in reports.
pub const CONDITION_LABEL: &str = "two-sided: kappa(C^T A C) with P = C C^T";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

/// `λmax / λmin` of `A`, or of the symmetric preconditioned operator
/// `Cᵀ A C` where `P = C Cᵀ`.
pub fn condition_number(a: &CsrMatrix, p: Option<&Preconditioner>) -> Result<f64> {
    let method = if a.n_rows() <= DENSE_CONDITION_LIMIT {
        EigenMethod::Dense
    } else {
        EigenMethod::Lanczos
    };
    condition_number_with(a, p, method)
}

pub fn condition_number_with(a: &CsrMatrix, p: Option<&Preconditioner>, method: EigenMethod) -> Result<f64> {
    let (lo, hi) = extreme_eigenvalues(a, p, method)?;
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue of the (preconditioned) operator is {lo:e}"
        )));
    }
    Ok(hi / lo)
}

/// `(λmin, λmax)` of `A` or `Cᵀ A C`.
pub fn extreme_eigenvalues(a: &CsrMatrix, p: Option<&Preconditioner>, method: EigenMethod) -> Result<(f64, f64)> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(
            "condition number needs a square matrix".into(),
        ));
    }
    let n = a.n_rows();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if let Some(p) = p {
        if p.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "preconditioner has size {}, matrix {n}",
                p.dim()
            )));
        }
    }
    match method {
        EigenMethod::Dense => {
            let ad = a.to_dense();
            let s = match p {
                Some(p) => {
                    let c = p.dense_factor();
                    c.transpose() * ad * c
                }
                None => ad,
            };
            let s = (&s + s.transpose()) * 0.5;
            let eig = SymmetricEigen::new(s).eigenvalues;
            Ok((eig.min(), eig.max()))
        }
        EigenMethod::Lanczos => Ok(lanczos_extremes(a, p, n.min(300))),
    }
}

/// Lanczos with full reorthogonalization on `P A`, which is self-adjoint in the
/// `A` inner product and similar to `Cᵀ A C`. Without `P` it runs on `A`.
fn lanczos_extremes(a: &CsrMatrix, p: Option<&Preconditioner>, steps: usize) -> (f64, f64) {
    use rand::Rng;
    let n = a.n_rows();
    let mut rng = rng_from_seed(0x1a2c_2055);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    // Inner product weight: A when preconditioned, identity otherwise.
    let weight = |x: &[f64]| -> Vec<f64> {
        match p {
            Some(_) => a.spmv(x).expect("square"),
            None => x.to_vec(),
        }
    };
    let op = |x: &[f64]| -> Vec<f64> {
        let ax = a.spmv(x).expect("square");
        match p {
            Some(p) => p.apply(&ax).expect("dimension checked"),
            None => ax,
        }
    };
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dot(&v, &weight(&v)).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut weighted: Vec<Vec<f64>> = Vec::new();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    for _ in 0..steps {
        let wv = weight(&v);
        let mut w = op(&v);
        let alpha = dot(&w, &wv);
        basis.push(v);
        weighted.push(wv);
        alphas.push(alpha);
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for (q, wq) in basis.iter().zip(&weighted) {
                let c = dot(&w, wq);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = dot(&w, &weight(&w)).max(0.0).sqrt();
        if beta <= 1e-12 * alpha.abs().max(1e-300) || basis.len() == n {
            break;
        }
        betas.push(beta);
        v = w.into_iter().map(|x| x / beta).collect();
    }
    let m = alphas.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t).eigenvalues;
    (eig.min(), eig.max())
}

/// Stored nonzeros of the preconditioner relative to `n²`.
pub fn density(p: &Preconditioner) -> f64 {
    p.nnz_cost() as f64 / (p.dim() as f64).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{jacobi_precond, spai_precond};
    use crate::sparse::{build_mask, tests_support::tridiag};
    use rand::{Rng, SeedableRng};

    fn random_spd(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        CsrMatrix::from_dense(&(&b * b.transpose() + DMatrix::identity(n, n) * 0.5), -1.0)
    }

    #[test]
    fn hand_values() {
        assert_eq!(condition_number(&CsrMatrix::identity(4), None).unwrap(), 1.0);
        let k = condition_number(&CsrMatrix::from_diagonal(&[1.0, 10.0]), None).unwrap();
        assert!((k - 10.0).abs() < 1e-12);
        let s = 2f64.sqrt();
        let k = condition_number(&tridiag(3), None).unwrap();
        assert!((k - (2.0 + s) / (2.0 - s)).abs() < 1e-10);
        assert!((k - 5.8284).abs() < 1e-4);
    }

    #[test]
    fn matches_dense_oracle_and_lanczos() {
        for seed in 0..5 {
            let a = random_spd(30, seed);
            let eig = SymmetricEigen::new(a.to_dense()).eigenvalues;
            let oracle = eig.max() / eig.min();
            let dense = condition_number(&a, None).unwrap();
            let lanczos = condition_number_with(&a, None, EigenMethod::Lanczos).unwrap();
            assert!((dense - oracle).abs() < 1e-6 * oracle);
            assert!((lanczos - oracle).abs() < 1e-6 * oracle, "{lanczos} vs {oracle}");
            let p = jacobi_precond(&a).unwrap();
            let d = condition_number(&a, Some(&p)).unwrap();
            let l = condition_number_with(&a, Some(&p), EigenMethod::Lanczos).unwrap();
            assert!((d - l).abs() < 1e-6 * d, "{d} vs {l}");
        }
    }

    #[test]
    fn jacobi_condition_invariant_under_diagonal_scaling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for seed in 0..5 {
            let a = random_spd(12, 10 + seed);
            let d: Vec<f64> = (0..12).map(|_| rng.random_range(0.1..10.0)).collect();
            let dad = CsrMatrix::from_triplets(12, 12, a.iter().map(|(i, j, v)| (i, j, d[i] * v * d[j]))).unwrap();
            let k1 = condition_number(&a, Some(&jacobi_precond(&a).unwrap())).unwrap();
            let k2 = condition_number(&dad, Some(&jacobi_precond(&dad).unwrap())).unwrap();
            assert!((k1 - k2).abs() < 1e-8 * k1);
        }
    }

    #[test]
    fn jacobi_helps_imbalanced_diagonal() {
        let a = random_spd(8, 1);
        let d: Vec<f64> = (0..8).map(|i| 10f64.powi(i as i32 % 4)).collect();
        let dad = CsrMatrix::from_triplets(8, 8, a.iter().map(|(i, j, v)| (i, j, d[i] * v * d[j]))).unwrap();
        let before = condition_number(&dad, None).unwrap();
        let after = condition_number(&dad, Some(&jacobi_precond(&dad).unwrap())).unwrap();
        assert!(after <= before);
    }

    #[test]
    fn exact_inverse_factor_gives_unit_condition() {
        let a = random_spd(10, 7);
        let l = nalgebra::Cholesky::new(a.to_dense()).unwrap().l();
        let r = CsrMatrix::from_dense(&l.try_inverse().unwrap().transpose(), -1.0);
        let k = condition_number(&a, Some(&spai_precond(&r).unwrap())).unwrap();
        assert!((k - 1.0).abs() < 1e-8);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(condition_number(&a, None), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn density_examples() {
        assert!((density(&Preconditioner::identity(10)) - 0.1).abs() < 1e-15);
        let full = CsrMatrix::from_dense(&DMatrix::from_element(5, 5, 1.0), -1.0);
        assert_eq!(density(&spai_precond(&full).unwrap()), 1.0);
        let a = crate::fem::assemble_poisson_p1(
            &crate::fem::generate_mesh(30, 1).unwrap(),
            &crate::fem::CoefficientField::constant(1.0),
        )
        .unwrap();
        let mask = build_mask(&a, 0.2).unwrap();
        let r = mask.to_csr();
        let expected = (a.nnz() + (0.2 * a.nnz() as f64).ceil() as usize) as f64 / 900.0;
        assert_eq!(density(&spai_precond(&r).unwrap()), expected);
    }
}
