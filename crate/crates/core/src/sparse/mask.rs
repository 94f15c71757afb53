use std::collections::BTreeSet;

use nalgebra::DMatrix;

use super::CsrMatrix;
use crate::error::{Error, Result};

/// Prescribed sparsity pattern of a preconditioner factor.
///
/// Always contains the full diagonal; rows are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityMask {
    n: usize,
    rows: Vec<Vec<usize>>,
}

impl SparsityMask {
    /// Builds a mask from arbitrary positions; the diagonal is always added.
    pub fn new(n: usize, positions: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut sets: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        for (i, j) in positions {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "mask position ({i}, {j}) outside dimension {n}"
                )));
            }
            sets[i].insert(j);
        }
        Ok(Self {
            n,
            rows: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn diagonal(n: usize) -> Self {
        Self {
            n,
            rows: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            rows: (0..n).map(|_| (0..n).collect()).collect(),
        }
    }

    /// Stored pattern of `a` plus the diagonal.
    pub fn from_pattern(a: &CsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("mask pattern must be square".into()));
        }
        Self::new(a.n_rows(), a.iter().map(|(i, j, _)| (i, j)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n && self.rows[i].binary_search(&j).is_ok()
    }

    /// Positions in row-major order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&j| (i, j)))
    }

    pub fn is_subset_of(&self, other: &SparsityMask) -> bool {
        self.n == other.n && self.positions().all(|(i, j)| other.contains(i, j))
    }

    /// CSR matrix with this pattern and all stored values zero.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz());
        for r in &self.rows {
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix::new(self.n, self.n, row_ptr, col_idx, vec![0.0; nnz]).expect("mask rows are sorted and in range")
    }
}

/// Restricts a dense matrix to the mask, keeping explicit zeros at masked
/// positions so the pattern is exactly `mask`.
pub fn apply_mask(d: &DMatrix<f64>, mask: &SparsityMask) -> Result<CsrMatrix> {
    if d.nrows() != mask.dim() || d.ncols() != mask.dim() {
        return Err(Error::DimensionMismatch(format!(
            "apply_mask: {}x{} matrix with a mask of dimension {}",
            d.nrows(),
            d.ncols(),
            mask.dim()
        )));
    }
    let mut out = mask.to_csr();
    let values: Vec<f64> = mask.positions().map(|(i, j)| d[(i, j)]).collect();
    out.values_mut().copy_from_slice(&values);
    Ok(out)
}

/// Pattern of `a` plus `ceil(extra_fraction · nnz(a))` positions of
/// `pattern(a²) \ pattern(a)`, chosen by largest `|(a²)ᵢⱼ|` with ties broken
/// in row-major order. Extras are budgeted globally, not per row.
pub fn build_mask(a: &CsrMatrix, extra_fraction: f64) -> Result<SparsityMask> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("build_mask needs a square matrix".into()));
    }
    if !(extra_fraction >= 0.0) || !extra_fraction.is_finite() {
        return Err(Error::InvalidInput(format!(
            "extra_fraction must be a finite non-negative number, got {extra_fraction}"
        )));
    }
    let base: Vec<(usize, usize)> = a.iter().map(|(i, j, _)| (i, j)).collect();
    let budget = (extra_fraction * a.nnz() as f64).ceil() as usize;
    if budget == 0 {
        return SparsityMask::new(a.n_rows(), base);
    }
    let a2 = a.matmul(a)?;
    let mut candidates: Vec<(f64, usize, usize)> = a2
        .iter()
        .filter(|&(i, j, _)| !a.contains(i, j))
        .map(|(i, j, v)| (v.abs(), i, j))
        .collect();
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let extras = candidates.into_iter().take(budget).map(|(_, i, j)| (i, j));
    SparsityMask::new(a.n_rows(), base.into_iter().chain(extras))
}
