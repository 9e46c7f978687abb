//! Binary checkpoint container.
//!
//! ```text
//! magic    8 bytes  "CRLCKPT\0"
//! version  u32 LE   (1)
//! meta     u32 LE length, then UTF-8 JSON object with sorted keys
//! count    u32 LE
//! record*  u32 LE name length, name bytes,
//!          u32 LE rank, rank x u64 LE dims,
//!          product(dims) x f64 LE values (row-major)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{DiffError, ParameterStore, Tensor};

const MAGIC: &[u8; 8] = b"CRLCKPT\0";
const VERSION: u32 = 1;

/// Architecture and provenance metadata stored next to the parameters.
pub type CheckpointMeta = BTreeMap<String, String>;

fn bad(msg: impl Into<String>) -> DiffError {
    DiffError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(store: &ParameterStore, meta: &CheckpointMeta, out: &mut W) -> Result<(), DiffError> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let meta_json = serde_json::to_vec(meta).map_err(|e| bad(e.to_string()))?;
    out.write_all(&(meta_json.len() as u32).to_le_bytes())?;
    out.write_all(&meta_json)?;
    out.write_all(&(store.len() as u32).to_le_bytes())?;
    for id in store.ids() {
        let p = store.param(id);
        out.write_all(&(p.name.len() as u32).to_le_bytes())?;
        out.write_all(p.name.as_bytes())?;
        out.write_all(&(p.shape.len() as u32).to_le_bytes())?;
        for &d in &p.shape {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in p.values.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DiffError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, DiffError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<(ParameterStore, CheckpointMeta), DiffError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = read_u32(input)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let meta_len = read_u32(input)? as usize;
    let mut meta_json = vec![0u8; meta_len];
    input.read_exact(&mut meta_json)?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_json).map_err(|e| bad(e.to_string()))?;
    let count = read_u32(input)?;
    let mut store = ParameterStore::new();
    for _ in 0..count {
        let name_len = read_u32(input)? as usize;
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("parameter name is not UTF-8"))?;
        let rank = read_u32(input)? as usize;
        if rank > 8 {
            return Err(bad(format!("implausible rank {rank}")));
        }
        let shape = (0..rank)
            .map(|_| read_u64(input).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            values.push(f64::from_le_bytes(b));
        }
        store.insert(&name, Tensor::new(shape, values)?)?;
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes after last record"));
    }
    Ok((store, meta))
}

pub fn save_checkpoint(store: &ParameterStore, meta: &CheckpointMeta, path: &Path) -> Result<(), DiffError> {
    let mut buf = Vec::new();
    write_checkpoint(store, meta, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ParameterStore, CheckpointMeta), DiffError> {
    let bytes = fs::read(path)?;
    read_checkpoint(&mut bytes.as_slice())
}
