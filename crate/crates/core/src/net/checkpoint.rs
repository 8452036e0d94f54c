//! Binary weight dump.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "RTDPNET\0"
//! version    u32      1
//! input_dim  u32
//! n_hidden   u32
//! hidden     u32 * n_hidden
//! actions    u32
//! n_params   u64
//! params     f64 * n_params   (flat layout of NetParams)
//! ```

use std::path::Path;

use super::mlp::{NetParams, NetShape};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RTDPNET\0";
pub const VERSION: u32 = 1;

pub fn to_bytes(params: &NetParams) -> Vec<u8> {
    let shape = params.shape();
    let mut out = Vec::with_capacity(32 + 8 * params.flat().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(shape.input_dim as u32).to_le_bytes());
    out.extend_from_slice(&(shape.hidden.len() as u32).to_le_bytes());
    for &h in &shape.hidden {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&(shape.action_count as u32).to_le_bytes());
    out.extend_from_slice(&(params.flat().len() as u64).to_le_bytes());
    for w in params.flat() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<NetParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input_dim = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    if n_hidden > 64 {
        return Err(Error::Checkpoint(format!("implausible layer count {n_hidden}")));
    }
    let hidden = (0..n_hidden)
        .map(|_| r.u32().map(|h| h as usize))
        .collect::<Result<Vec<_>>>()?;
    let action_count = r.u32()? as usize;
    let shape = NetShape::new(input_dim, hidden, action_count)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let n_params = r.u64()? as usize;
    if n_params != shape.param_count() {
        return Err(Error::Checkpoint(format!(
            "header declares {n_params} parameters, shape implies {}",
            shape.param_count()
        )));
    }
    let data = r
        .take(n_params.checked_mul(8).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    NetParams::from_flat(shape, data)
}

pub fn save(params: &NetParams, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(params))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<NetParams> {
    from_bytes(&std::fs::read(path)?)
}
