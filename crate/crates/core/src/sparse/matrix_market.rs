//! Matrix Market coordinate files.
//!
//! Reads `real`/`integer`/`pattern` fields with `general` or `symmetric`
//! symmetry. Matrices are written as `coordinate real general`, masks as
//! `coordinate pattern general`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CsrMatrix, SparsityMask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

struct Parsed {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

fn parse(text: &str, path: &Path) -> Result<Parsed> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty file"))?
        .to_ascii_lowercase();
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::parse(path, format!("bad header line: {header}")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::parse(path, "only coordinate format is supported"));
    }
    let field = match tokens[3] {
        "real" | "integer" | "double" => Field::Real,
        "pattern" => Field::Pattern,
        other => return Err(Error::parse(path, format!("unsupported field '{other}'"))),
    };
    let symmetric = match tokens[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::parse(path, format!("unsupported symmetry '{other}'"))),
    };

    let mut data = lines.filter(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let size_line = data.next().ok_or_else(|| Error::parse(path, "missing size line"))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, format!("size line: {e}")))?;
    let [n_rows, n_cols, nnz] = sizes[..] else {
        return Err(Error::parse(path, "size line needs three integers"));
    };

    let mut entries = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    for (k, line) in data.enumerate() {
        if k >= nnz {
            return Err(Error::parse(path, "more entries than declared"));
        }
        let mut it = line.split_whitespace();
        let mut index = |name: &str| -> Result<usize> {
            let v: usize = it
                .next()
                .ok_or_else(|| Error::parse(path, format!("entry {k}: missing {name}")))?
                .parse()
                .map_err(|e| Error::parse(path, format!("entry {k}: {e}")))?;
            if v == 0 {
                return Err(Error::parse(path, format!("entry {k}: indices are 1-based")));
            }
            Ok(v - 1)
        };
        let i = index("row")?;
        let j = index("column")?;
        let v = match field {
            Field::Pattern => 1.0,
            Field::Real => it
                .next()
                .ok_or_else(|| Error::parse(path, format!("entry {k}: missing value")))?
                .parse::<f64>()
                .map_err(|e| Error::parse(path, format!("entry {k}: {e}")))?,
        };
        if i >= n_rows || j >= n_cols {
            return Err(Error::parse(path, format!("entry {k} out of range")));
        }
        entries.push((i, j, v));
        if symmetric && i != j {
            entries.push((j, i, v));
        }
    }
    let declared = if symmetric {
        entries.iter().filter(|&&(i, j, _)| i >= j).count()
    } else {
        entries.len()
    };
    if declared != nnz {
        return Err(Error::parse(path, format!("expected {nnz} entries, found {declared}")));
    }
    Ok(Parsed {
        n_rows,
        n_cols,
        entries,
    })
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, path)
}

pub(crate) fn parse_matrix(text: &str, path: &Path) -> Result<CsrMatrix> {
    let p = parse(text, path)?;
    CsrMatrix::from_triplets(p.n_rows, p.n_cols, p.entries)
}

pub fn format_matrix(a: &CsrMatrix) -> String {
    let mut s = String::with_capacity(32 * a.nnz() + 64);
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz());
    for (i, j, v) in a.iter() {
        // `{:e}` on f64 prints the shortest representation that round-trips.
        let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
    }
    s
}

pub fn write_matrix(path: impl AsRef<Path>, a: &CsrMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(a)).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SparsityMask> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let p = parse(&text, path)?;
    if p.n_rows != p.n_cols {
        return Err(Error::parse(path, "mask must be square"));
    }
    SparsityMask::new(p.n_rows, p.entries.into_iter().map(|(i, j, _)| (i, j)))
}

pub fn write_mask(path: impl AsRef<Path>, mask: &SparsityMask) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::with_capacity(16 * mask.nnz() + 64);
    s.push_str("%%MatrixMarket matrix coordinate pattern general\n");
    let _ = writeln!(s, "{} {} {}", mask.dim(), mask.dim(), mask.nnz());
    for (i, j) in mask.positions() {
        let _ = writeln!(s, "{} {}", i + 1, j + 1);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_symmetric_and_expands() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2\n2 1 -1\n2 2 2\n3 3 1.5\n";
        let a = parse_matrix(text, Path::new("t.mtx")).unwrap();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(0, 1), Some(-1.0));
        assert_eq!(a.get(1, 0), Some(-1.0));
        assert_eq!(a.get(2, 2), Some(1.5));
    }

    #[test]
    fn rejects_bad_input() {
        let p = Path::new("t.mtx");
        assert!(parse_matrix("%%MatrixMarket matrix array real general\n1 1\n1\n", p).is_err());
        assert!(parse_matrix("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n", p).is_err());
        assert!(parse_matrix("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n", p).is_err());
        assert!(parse_matrix("%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1\n", p).is_err());
    }

    #[test]
    fn mask_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mtx");
        let mask = SparsityMask::new(4, [(0, 3), (2, 1)]).unwrap();
        write_mask(&path, &mask).unwrap();
        assert_eq!(read_mask(&path).unwrap(), mask);
    }

    proptest! {
        #[test]
        fn matrix_text_round_trip_is_exact(
            entries in proptest::collection::vec((0usize..7, 0usize..5, -1e6f64..1e6), 0..30)
        ) {
            let a = CsrMatrix::from_triplets(7, 5, entries).unwrap();
            let b = parse_matrix(&format_matrix(&a), Path::new("p.mtx")).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
