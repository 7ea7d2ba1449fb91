//! Binary model files.
//!
//! Layout (little-endian):
//!
//! | bytes | field                         |
//! |-------|-------------------------------|
//! | 4     | magic `LSAE`                  |
//! | 2     | format version (u16, = 1)     |
//! | 1     | kind (u8: 0 = fc, 1 = conv)   |
//! | 4     | nc (u32)                      |
//! | 4     | nw (u32)                      |
//! | 4     | latent dim (u32)              |
//! | 8     | parameter count (u64)         |
//! | 8·N   | parameters (f64)              |

use std::path::Path;

use super::arch::{build_arch, ArchKind};
use super::net::AeModel;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LSAE";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 4 + 4 + 4 + 8;

pub fn to_bytes(model: &AeModel) -> Vec<u8> {
    let arch = &model.arch;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * model.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(arch.kind.code());
    out.extend_from_slice(&(arch.nc as u32).to_le_bytes());
    out.extend_from_slice(&(arch.nw as u32).to_le_bytes());
    out.extend_from_slice(&(arch.latent_dim as u32).to_le_bytes());
    out.extend_from_slice(&(model.params.len() as u64).to_le_bytes());
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<AeModel> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::ModelFormat(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::ModelFormat("bad magic (expected LSAE)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported format version {version}")));
    }
    let kind = ArchKind::from_code(bytes[6])
        .ok_or_else(|| Error::ModelFormat(format!("unknown architecture code {}", bytes[6])))?;
    let (nc, nw, latent) = (u32_at(7), u32_at(11), u32_at(15));
    let count = u64::from_le_bytes(bytes[19..27].try_into().unwrap()) as usize;
    let arch = build_arch(kind, nc, nw).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if arch.latent_dim != latent || arch.n_params != count {
        return Err(Error::ModelFormat(format!(
            "header declares latent {latent} and {count} parameters, {kind} nc={nc} nw={nw} has {} and {}",
            arch.latent_dim, arch.n_params
        )));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * count {
        return Err(Error::ModelFormat(format!(
            "expected {} parameter bytes, found {}",
            8 * count,
            body.len()
        )));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut model = AeModel::zeros(arch);
    model.params = params;
    Ok(model)
}

pub fn save(model: &AeModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<AeModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
