//! On-disk dataset layout.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/train/sample_00012.A.mtx      system matrix (Matrix Market)
//! <dir>/train/sample_00012.ainv.bin   u64 LE dimension, then n² f64 LE, row-major
//! <dir>/train/sample_00012.b.txt      right-hand side, one value per line
//! <dir>/train/sample_00012.mask.mtx   mask (Matrix Market pattern)
//! <dir>/test/...
//! ```
//!
//! The manifest is written last and records a SHA-256 digest per file.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CoefficientField, DatasetSplit, Family, ProblemSample};
use crate::error::{Error, Result};
use crate::sparse::matrix_market;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: usize,
    pub coefficient: [f64; 6],
    pub matrix: String,
    pub inverse: String,
    pub rhs: String,
    pub mask: String,
    pub sha256: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub family: Family,
    pub mesh_id: String,
    pub seed: u64,
    pub extra_fraction: f64,
    pub penalty: Option<f64>,
    pub n: usize,
    pub discarded: usize,
    pub train: Vec<SampleEntry>,
    pub test: Vec<SampleEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::parse(
                &path,
                format!("unsupported format version {}", m.format_version),
            ));
        }
        Ok(m)
    }

    /// Checks that every listed file exists with the recorded digest.
    pub fn validate(&self, dir: &Path) -> Result<()> {
        for e in self.train.iter().chain(&self.test) {
            let files = [&e.matrix, &e.inverse, &e.rhs, &e.mask];
            if e.sha256.len() != files.len() {
                return Err(Error::parse(dir.join(MANIFEST_FILE), "digest count"));
            }
            for (f, want) in files.iter().zip(&e.sha256) {
                let path = dir.join(f);
                let bytes = fs::read(&path).map_err(|err| Error::io(&path, err))?;
                if &sha256_hex(&bytes) != want {
                    return Err(Error::parse(path, "checksum mismatch"));
                }
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_dense(m: &DMatrix<f64>) -> Vec<u8> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(8 + 8 * n * n);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_dense(bytes: &[u8], path: &Path) -> Result<DMatrix<f64>> {
    if bytes.len() < 8 {
        return Err(Error::parse(path, "missing dimension header"));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + 8 * n * n {
        return Err(Error::parse(
            path,
            format!("expected {} bytes for n = {n}", 8 + 8 * n * n),
        ));
    }
    let vals: Vec<f64> = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DMatrix::from_row_slice(n, n, &vals))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}

fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}\n")).collect()
}

fn parse_vector(text: &str, path: &Path) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::parse(path, e.to_string())))
        .collect()
}

fn write_samples(dir: &Path, sub: &str, samples: &[ProblemSample]) -> Result<Vec<SampleEntry>> {
    let sub_dir = dir.join(sub);
    fs::create_dir_all(&sub_dir).map_err(|e| Error::io(&sub_dir, e))?;
    samples
        .iter()
        .map(|s| {
            let stem = format!("{sub}/sample_{:05}", s.id);
            let names = [
                format!("{stem}.A.mtx"),
                format!("{stem}.ainv.bin"),
                format!("{stem}.b.txt"),
                format!("{stem}.mask.mtx"),
            ];
            let a_inv = s
                .a_inv
                .as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("sample {} has no inverse to store", s.id)))?;
            let mask_text = {
                let tmp = dir.join(&names[3]);
                matrix_market::write_mask(&tmp, &s.mask)?;
                fs::read(&tmp).map_err(|e| Error::io(&tmp, e))?
            };
            let sha256 = vec![
                write_file(&dir.join(&names[0]), matrix_market::format_matrix(&s.a).as_bytes())?,
                write_file(&dir.join(&names[1]), &encode_dense(a_inv))?,
                write_file(&dir.join(&names[2]), format_vector(&s.b).as_bytes())?,
                sha256_hex(&mask_text),
            ];
            let [matrix, inverse, rhs, mask] = names;
            Ok(SampleEntry {
                id: s.id,
                coefficient: s.coefficient.coeffs,
                matrix,
                inverse,
                rhs,
                mask,
                sha256,
            })
        })
        .collect()
}

/// Writes all sample files, then the manifest. Returns the manifest path.
pub fn write_dataset(dir: &Path, split: &DatasetSplit) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = split.dim().ok_or_else(|| Error::InvalidInput("empty dataset".into()))?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        family: split.family,
        mesh_id: split.mesh_id.clone(),
        seed: split.seed,
        extra_fraction: split.extra_fraction,
        penalty: split.penalty,
        n,
        discarded: split.discarded,
        train: write_samples(dir, "train", &split.train)?,
        test: write_samples(dir, "test", &split.test)?,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn read_sample(dir: &Path, e: &SampleEntry, family: Family, load_inverse: bool) -> Result<ProblemSample> {
    let a = matrix_market::read_matrix(dir.join(&e.matrix))?;
    let a_inv = if load_inverse {
        let path = dir.join(&e.inverse);
        let bytes = fs::read(&path).map_err(|err| Error::io(&path, err))?;
        Some(decode_dense(&bytes, &path)?)
    } else {
        None
    };
    let rhs_path = dir.join(&e.rhs);
    let text = fs::read_to_string(&rhs_path).map_err(|err| Error::io(&rhs_path, err))?;
    let b = parse_vector(&text, &rhs_path)?;
    let mask = matrix_market::read_mask(dir.join(&e.mask))?;
    if b.len() != a.n_rows() || mask.dim() != a.n_rows() {
        return Err(Error::DimensionMismatch(format!("sample {} files disagree on n", e.id)));
    }
    Ok(ProblemSample {
        id: e.id,
        a,
        a_inv,
        b,
        family,
        coefficient: CoefficientField::new(e.coefficient),
        mask,
    })
}

/// Loads and validates a dataset. Inverses are only read when requested.
pub fn read_dataset(dir: &Path, load_inverse: bool) -> Result<DatasetSplit> {
    let m = Manifest::read(dir)?;
    m.validate(dir)?;
    let load = |entries: &[SampleEntry]| -> Result<Vec<ProblemSample>> {
        entries
            .iter()
            .map(|e| read_sample(dir, e, m.family, load_inverse))
            .collect()
    };
    let split = DatasetSplit {
        train: load(&m.train)?,
        test: load(&m.test)?,
        seed: m.seed,
        mesh_id: m.mesh_id.clone(),
        family: m.family,
        extra_fraction: m.extra_fraction,
        penalty: m.penalty,
        discarded: m.discarded,
    };
    if split.train.iter().chain(&split.test).any(|s| s.dim() != m.n) {
        return Err(Error::DimensionMismatch(
            "sample dimension differs from manifest".into(),
        ));
    }
    Ok(split)
}
