use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse row matrix of `f64`.
///
/// Column indices are strictly increasing within each row. Explicitly stored
/// zeros are allowed; they carry pattern information (e.g. mask positions).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating every structural invariant.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 {
            return Err(Error::InvalidInput(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                n_rows + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[n_rows] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::InvalidInput(
                "row_ptr must start at 0 and end at nnz; col_idx and values must have nnz entries".into(),
            ));
        }
        for i in 0..n_rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidInput(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &c) in cols.iter().enumerate() {
                if c >= n_cols {
                    return Err(Error::InvalidInput(format!(
                        "column {c} out of range in row {i} (n_cols = {n_cols})"
                    )));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::InvalidInput(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicate positions are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for (i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::InvalidInput(format!(
                    "triplet ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
            rows[i].push((j, v));
        }
        Ok(Self::from_rows(n_cols, rows))
    }

    /// Builds from unsorted per-row entry lists, summing duplicates.
    pub(crate) fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Stores every entry of `d` whose magnitude exceeds `drop_below` (use a
    /// negative value to keep the full dense pattern).
    pub fn from_dense(d: &DMatrix<f64>, drop_below: f64) -> Self {
        let rows = (0..d.nrows())
            .map(|i| {
                (0..d.ncols())
                    .filter(|&j| d[(i, j)].abs() > drop_below)
                    .map(|j| (j, d[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(d.ncols(), rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Stored value at `(i, j)`, or `None` when the position is not stored.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).0.binary_search(&j).is_ok()
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Diagonal entries (zero where not stored).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i).unwrap_or(0.0))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_cols];
        for (i, j, v) in self.iter() {
            rows[j].push((i, v));
        }
        Self::from_rows(self.n_rows, rows)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Same pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.nnz() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a pattern with {} entries",
                values.len(),
                self.nnz()
            )));
        }
        Ok(Self { values, ..self.clone() })
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "spmv: vector of length {} for a matrix with {} columns",
                x.len(),
                self.n_cols
            )));
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked `y = A x` into a preallocated buffer.
    pub(crate) fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y = Aᵀ x` without forming the transpose.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(Error::DimensionMismatch(format!(
                "spmv_transpose: vector of length {} for a matrix with {} rows",
                x.len(),
                self.n_rows
            )));
        }
        let mut y = vec![0.0; self.n_cols];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        Ok(y)
    }

    /// Sparse product `self · other` (Gustavson row-by-row).
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut acc = vec![0.0; other.n_cols];
        let mut seen = vec![usize::MAX; other.n_cols];
        let mut rows = Vec::with_capacity(self.n_rows);
        for i in 0..self.n_rows {
            let mut touched = Vec::new();
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b) in ocols.iter().zip(ovals) {
                    if seen[j] != i {
                        seen[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            rows.push(touched.into_iter().map(|j| (j, acc[j])).collect());
        }
        Ok(Self::from_rows(other.n_cols, rows))
    }

    /// `(A + Aᵀ) / 2` on the union pattern, exactly symmetric in floating point.
    pub fn symmetrized(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("symmetrized needs a square matrix".into()));
        }
        let t = self.transpose();
        let rows = (0..self.n_rows)
            .map(|i| {
                let (mut c1, mut c2) = (self.row(i).0, t.row(i).0);
                let mut row = Vec::with_capacity(c1.len().max(c2.len()));
                while let Some(&j) = match (c1.first(), c2.first()) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                } {
                    let a = self.get(i, j).unwrap_or(0.0);
                    let b = t.get(i, j).unwrap_or(0.0);
                    row.push((j, 0.5 * (a + b)));
                    if c1.first() == Some(&j) {
                        c1 = &c1[1..];
                    }
                    if c2.first() == Some(&j) {
                        c2 = &c2[1..];
                    }
                }
                row
            })
            .collect();
        Ok(Self::from_rows(self.n_cols, rows))
    }

    /// `max |A - Aᵀ|` over stored and mirrored positions.
    pub fn max_asymmetry(&self) -> f64 {
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i).unwrap_or(0.0)).abs())
            .fold(0.0, f64::max)
    }
}
