use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ic::IcFactor;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecondKind {
    Identity,
    Jacobi,
    IcDroptol,
    Spai,
}

impl fmt::Display for PrecondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecondKind::Identity => "identity",
            PrecondKind::Jacobi => "jacobi",
            PrecondKind::IcDroptol => "ic_droptol",
            PrecondKind::Spai => "spai",
        })
    }
}

#[derive(Debug, Clone)]
enum Op {
    Identity,
    Diagonal(Vec<f64>),
    Cholesky(IcFactor),
    /// `P = R Rᵀ`, with `Rᵀ` kept explicitly for the first product.
    Factor {
        r: CsrMatrix,
        rt: CsrMatrix,
    },
}

/// A symmetric positive definite operator `P ≈ A⁻¹`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PrecondKind,
    n: usize,
    op: Op,
}

impl Preconditioner {
    pub fn identity(n: usize) -> Self {
        Self {
            kind: PrecondKind::Identity,
            n,
            op: Op::Identity,
        }
    }

    pub(crate) fn from_ic(factor: IcFactor) -> Self {
        Self {
            kind: PrecondKind::IcDroptol,
            n: factor.dim(),
            op: Op::Cholesky(factor),
        }
    }

    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored nonzeros backing `apply`.
    pub fn nnz_cost(&self) -> usize {
        match &self.op {
            Op::Identity => self.n,
            Op::Diagonal(d) => d.len(),
            Op::Cholesky(f) => 2 * f.nnz(),
            Op::Factor { r, .. } => r.nnz(),
        }
    }

    pub fn ic_factor(&self) -> Option<&IcFactor> {
        match &self.op {
            Op::Cholesky(f) => Some(f),
            _ => None,
        }
    }

    /// `x = P y`.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "preconditioner of size {} applied to a vector of length {}",
                self.n,
                y.len()
            )));
        }
        let mut out = vec![0.0; self.n];
        self.apply_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, y: &[f64], out: &mut [f64]) {
        match &self.op {
            Op::Identity => out.copy_from_slice(y),
            Op::Diagonal(inv) => {
                for ((o, &yi), &d) in out.iter_mut().zip(y).zip(inv) {
                    *o = yi * d;
                }
            }
            Op::Cholesky(f) => f.solve_into(y, out),
            Op::Factor { r, rt } => {
                let mut tmp = vec![0.0; self.n];
                rt.spmv_into(y, &mut tmp);
                r.spmv_into(&tmp, out);
            }
        }
    }

    /// Dense `C` with `P = C Cᵀ`.
    pub fn dense_factor(&self) -> DMatrix<f64> {
        let n = self.n;
        match &self.op {
            Op::Identity => DMatrix::identity(n, n),
            Op::Diagonal(inv) => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, inv.iter().map(|d| d.sqrt())))
            }
            // P = (L Lᵀ)⁻¹ = L⁻ᵀ L⁻¹
            Op::Cholesky(f) => f
                .lower()
                .to_dense()
                .transpose()
                .solve_upper_triangular(&DMatrix::identity(n, n))
                .expect("incomplete Cholesky factor has a positive diagonal"),
            Op::Factor { r, .. } => r.to_dense(),
        }
    }

    /// Dense matrix of the operator, column by column.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut d = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            d.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        d
    }
}

/// `P = diag(A)⁻¹`.
pub fn jacobi_precond(a: &CsrMatrix) -> Result<Preconditioner> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("jacobi needs a square matrix".into()));
    }
    let diag = a.diagonal();
    if let Some((i, d)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("diagonal entry {i} is {d}")));
    }
    Ok(Preconditioner {
        kind: PrecondKind::Jacobi,
        n: diag.len(),
        op: Op::Diagonal(diag.iter().map(|d| 1.0 / d).collect()),
    })
}

/// `P = R Rᵀ`, applied as two sparse matrix-vector products.
pub fn spai_precond(r: &CsrMatrix) -> Result<Preconditioner> {
    if !r.is_square() {
        return Err(Error::DimensionMismatch("SPAI factor must be square".into()));
    }
    Ok(Preconditioner {
        kind: PrecondKind::Spai,
        n: r.n_rows(),
        op: Op::Factor {
            r: r.clone(),
            rt: r.transpose(),
        },
    })
}
