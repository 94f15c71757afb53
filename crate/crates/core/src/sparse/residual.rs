use super::CsrMatrix;
use crate::error::{Error, Result};

fn check_square_pair(a: &CsrMatrix, r: &CsrMatrix) -> Result<usize> {
    if !a.is_square() || !r.is_square() || a.n_rows() != r.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "residual needs square A and R of equal size, got {}x{} and {}x{}",
            a.n_rows(),
            a.n_cols(),
            r.n_rows(),
            r.n_cols()
        )));
    }
    Ok(a.n_rows())
}

/// Dense row-major `E = I - RᵀAR`, computed from sparse `A` and sparse `R`.
fn residual_matrix(a: &CsrMatrix, r: &CsrMatrix) -> Vec<f64> {
    let n = a.n_rows();
    // AR, row-major.
    let mut ar = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut ar[i * n..(i + 1) * n];
        let (acols, avals) = a.row(i);
        for (&k, &aik) in acols.iter().zip(avals) {
            let (rcols, rvals) = r.row(k);
            for (&j, &rkj) in rcols.iter().zip(rvals) {
                row[j] += aik * rkj;
            }
        }
    }
    // E = I - Rᵀ (AR)
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        e[i * n + i] = 1.0;
    }
    for i in 0..n {
        let (rcols, rvals) = r.row(i);
        let ar_row = &ar[i * n..(i + 1) * n];
        for (&p, &rip) in rcols.iter().zip(rvals) {
            let e_row = &mut e[p * n..(p + 1) * n];
            for (ev, &x) in e_row.iter_mut().zip(ar_row) {
                *ev -= rip * x;
            }
        }
    }
    e
}

/// `‖I - RᵀAR‖_F`.
pub fn frobenius_residual(a: &CsrMatrix, r: &CsrMatrix) -> Result<f64> {
    check_square_pair(a, r)?;
    let e = residual_matrix(a, r);
    Ok(e.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// `‖I - RᵀAR‖_F²` and its gradient with respect to the stored values of `R`
/// (aligned with `r.values()`).
///
/// With `E = I - RᵀAR` the gradient is `-2 (A R Eᵀ + Aᵀ R E)`.
pub fn squared_residual_with_grad(a: &CsrMatrix, r: &CsrMatrix) -> Result<(f64, Vec<f64>)> {
    let n = check_square_pair(a, r)?;
    let e = residual_matrix(a, r);
    let loss = e.iter().map(|x| x * x).sum::<f64>();

    let mut et = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            et[j * n + i] = e[i * n + j];
        }
    }
    // W1 = R Eᵀ, W2 = R E
    let mut w1 = vec![0.0; n * n];
    let mut w2 = vec![0.0; n * n];
    for k in 0..n {
        let (rcols, rvals) = r.row(k);
        for (&j, &rkj) in rcols.iter().zip(rvals) {
            let (et_row, e_row) = (&et[j * n..(j + 1) * n], &e[j * n..(j + 1) * n]);
            let w1_row = &mut w1[k * n..(k + 1) * n];
            for (w, &x) in w1_row.iter_mut().zip(et_row) {
                *w += rkj * x;
            }
            let w2_row = &mut w2[k * n..(k + 1) * n];
            for (w, &x) in w2_row.iter_mut().zip(e_row) {
                *w += rkj * x;
            }
        }
    }
    let at = a.transpose();
    let mut grad = Vec::with_capacity(r.nnz());
    for i in 0..n {
        let (acols, avals) = a.row(i);
        let (atcols, atvals) = at.row(i);
        for &j in r.row(i).0 {
            let mut g = 0.0;
            for (&k, &aik) in acols.iter().zip(avals) {
                g += aik * w1[k * n + j];
            }
            for (&k, &aki) in atcols.iter().zip(atvals) {
                g += aki * w2[k * n + j];
            }
            grad.push(-2.0 * g);
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn dense_residual(a: &CsrMatrix, r: &CsrMatrix) -> f64 {
        let (a, r) = (a.to_dense(), r.to_dense());
        let n = a.nrows();
        (DMatrix::identity(n, n) - r.transpose() * a * r).norm()
    }

    #[test]
    fn exact_roots_give_zero() {
        let i3 = CsrMatrix::identity(3);
        assert_eq!(frobenius_residual(&i3, &i3).unwrap(), 0.0);
        let a = CsrMatrix::from_diagonal(&[4.0]);
        let r = CsrMatrix::from_diagonal(&[0.5]);
        assert_eq!(frobenius_residual(&a, &r).unwrap(), 0.0);
    }

    #[test]
    fn scalar_case() {
        let a = CsrMatrix::from_diagonal(&[4.0]);
        let r = CsrMatrix::from_diagonal(&[1.0]);
        assert_eq!(frobenius_residual(&a, &r).unwrap(), 3.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = CsrMatrix::identity(3);
        let r = CsrMatrix::identity(2);
        assert!(frobenius_residual(&a, &r).is_err());
    }

    #[test]
    fn matches_dense_and_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || rng.random::<f64>() < 0.3 {
                    t.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t.clone()).unwrap();
        let r = CsrMatrix::from_triplets(n, n, t.iter().map(|&(i, j, v)| (j, i, 0.5 * v))).unwrap();
        let f = frobenius_residual(&a, &r).unwrap();
        let fd = dense_residual(&a, &r);
        assert!((f - fd).abs() <= 1e-12 * fd);

        let (loss, grad) = squared_residual_with_grad(&a, &r).unwrap();
        assert!((loss - fd * fd).abs() <= 1e-12 * loss);
        let h = 1e-6;
        for k in 0..r.nnz() {
            let mut vp = r.values().to_vec();
            vp[k] += h;
            let mut vm = r.values().to_vec();
            vm[k] -= h;
            let lp = dense_residual(&a, &r.with_values(vp).unwrap()).powi(2);
            let lm = dense_residual(&a, &r.with_values(vm).unwrap()).powi(2);
            let num = (lp - lm) / (2.0 * h);
            assert!(
                (num - grad[k]).abs() < 1e-6 * num.abs().max(1.0),
                "{num} vs {}",
                grad[k]
            );
        }
    }
}
