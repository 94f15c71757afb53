use super::precond::Preconditioner;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Incomplete Cholesky factor `L` with `A ≈ L Lᵀ`.
#[derive(Debug, Clone)]
pub struct IcFactor {
    /// Lower triangle by rows; the diagonal is the last entry of each row.
    l: CsrMatrix,
    /// `Lᵀ` by rows; the diagonal is the first entry of each row.
    lt: CsrMatrix,
    /// Diagonal shift `β` applied before a successful factorization.
    shift: f64,
}

impl IcFactor {
    pub fn dim(&self) -> usize {
        self.l.n_rows()
    }

    pub fn nnz(&self) -> usize {
        self.l.nnz()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn lower(&self) -> &CsrMatrix {
        &self.l
    }

    /// Solves `L Lᵀ x = y`.
    pub(crate) fn solve_into(&self, y: &[f64], x: &mut [f64]) {
        let n = self.dim();
        // L z = y
        for i in 0..n {
            let (cols, vals) = self.l.row(i);
            let last = cols.len() - 1;
            let mut s = y[i];
            for k in 0..last {
                s -= vals[k] * x[cols[k]];
            }
            x[i] = s / vals[last];
        }
        // Lᵀ x = z
        for i in (0..n).rev() {
            let (cols, vals) = self.lt.row(i);
            let mut s = x[i];
            for k in 1..cols.len() {
                s -= vals[k] * x[cols[k]];
            }
            x[i] = s / vals[0];
        }
    }
}

const MAX_SHIFT_TRIES: usize = 5;

/// Left-looking incomplete Cholesky. An off-diagonal `L[i,j]` is dropped when
/// `|L[i,j]| < droptol · ‖A[:,j]‖₂`; `droptol = 0` keeps all fill (exact
/// Cholesky) and `droptol = ∞` keeps only the diagonal.
///
/// On pivot breakdown the factorization is retried on `A + βI` with
/// `β = 1e-3 · mean(diag A)`, doubling `β` up to five times.
pub fn ic_droptol(a: &CsrMatrix, droptol: f64) -> Result<Preconditioner> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(
            "incomplete Cholesky needs a square matrix".into(),
        ));
    }
    if !(droptol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "drop tolerance must be >= 0, got {droptol}"
        )));
    }
    let n = a.n_rows();
    let mean_diag = a.diagonal().iter().sum::<f64>() / n.max(1) as f64;
    let mut shift = 0.0;
    let mut last_err = None;
    for attempt in 0..=MAX_SHIFT_TRIES {
        match factorize(a, droptol, shift) {
            Ok((l, lt)) => return Ok(Preconditioner::from_ic(IcFactor { l, lt, shift })),
            Err(e) => {
                log::debug!("incomplete Cholesky breakdown with shift {shift}: {e}");
                last_err = Some(e);
                shift = if attempt == 0 { 1e-3 * mean_diag } else { 2.0 * shift };
            }
        }
    }
    Err(last_err.unwrap())
}

fn factorize(a: &CsrMatrix, droptol: f64, shift: f64) -> Result<(CsrMatrix, CsrMatrix)> {
    let n = a.n_rows();
    let mut col_norm = vec![0.0; n];
    for (_, j, v) in a.iter() {
        col_norm[j] += v * v;
    }
    col_norm.iter_mut().for_each(|c| *c = c.sqrt());

    // Columns of L (row, value), diagonal first; and per-row lists (col, value).
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut work = vec![0.0; n];
    let mut marked = vec![false; n];
    let mut pattern: Vec<usize> = Vec::new();

    for j in 0..n {
        pattern.clear();
        let (acols, avals) = a.row(j);
        for (&i, &v) in acols.iter().zip(avals) {
            if i >= j {
                work[i] = v;
                marked[i] = true;
                pattern.push(i);
            }
        }
        if !marked[j] {
            work[j] = 0.0;
            marked[j] = true;
            pattern.push(j);
        }
        work[j] += shift;
        for &(k, ljk) in &rows[j] {
            for &(i, lik) in &cols[k] {
                if i < j {
                    continue;
                }
                if !marked[i] {
                    marked[i] = true;
                    work[i] = 0.0;
                    pattern.push(i);
                }
                work[i] -= lik * ljk;
            }
        }
        let d = work[j];
        if !(d > 0.0) {
            for &i in &pattern {
                marked[i] = false;
            }
            return Err(Error::NotPositiveDefinite(format!("pivot {d:e} at column {j}")));
        }
        let ljj = d.sqrt();
        pattern.sort_unstable();
        let threshold = droptol * col_norm[j];
        let mut col = Vec::with_capacity(pattern.len());
        col.push((j, ljj));
        for &i in &pattern {
            marked[i] = false;
            if i == j {
                continue;
            }
            let lij = work[i] / ljj;
            if lij.abs() >= threshold {
                col.push((i, lij));
                rows[i].push((j, lij));
            }
        }
        cols[j] = col;
    }
    let l = CsrMatrix::from_rows(
        n,
        rows.into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.push((i, cols[i][0].1));
                r
            })
            .collect(),
    );
    let lt = CsrMatrix::from_rows(n, cols);
    Ok((l, lt))
}
