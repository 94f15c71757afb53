//! Binary checkpoint container:
//!
//! ```text
//! magic "GCVAECKP" | u32 version | u64 len | config JSON
//! u64 tensor count | per tensor: u32 name len, name, u32 rank, u64 dims, f64 data
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::network::Gcvae;
use super::params::{ParamBuilder, ParameterSet};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const MAGIC: &[u8; 8] = b"GCVAECKP";
const VERSION: u32 = 1;

pub fn encode_checkpoint(model: &Gcvae) -> Result<Vec<u8>> {
    let config =
        serde_json::to_vec(model.config()).map_err(|e| Error::Checkpoint(format!("config serialization: {e}")))?;
    let params = model.params();
    let mut out = Vec::with_capacity(64 + config.len() + 8 * params.num_scalars());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u64).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for t in params.tensors() {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Checkpoint("length overflows usize".into()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Gcvae> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let len = r.u64()?;
    let config: ModelConfig =
        serde_json::from_slice(r.take(len)?).map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
    let count = r.u64()?;
    let mut pb = ParamBuilder::new(rng_from_seed(0));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let raw = r.take(
            len.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("tensor too large".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pb.with_data(&name, shape, data);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    let params: ParameterSet = pb.params;
    Gcvae::from_parts(config, params)
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &Gcvae) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Gcvae> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
