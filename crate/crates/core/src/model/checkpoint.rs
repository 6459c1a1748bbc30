//! Binary checkpoint format.
//!
//! ```text
//! "HRMN" | u32 version | u64 header length | header JSON {config, vocab}
//! u32 tensor count, then per tensor:
//!   u32 name length | UTF-8 name | u32 rank | u64 dims[rank] | f64 values (LE)
//! ```
//! All integers are little-endian.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Herman, HermanConfig, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HRMN";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Guards against absurd allocations from corrupt files.
const MAX_RANK: u32 = 8;
const MAX_NAME: u32 = 4096;

#[derive(Serialize, Deserialize)]
struct Header {
    config: HermanConfig,
    vocab: Vocabulary,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(model: &Herman, mut w: W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let header = serde_json::to_vec(&Header { config: model.config.clone(), vocab: model.vocab.clone() })?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;

    let params = model.store.params();
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for p in params {
        w.write_all(&(p.name.len() as u32).to_le_bytes())?;
        w.write_all(p.name.as_bytes())?;
        let shape = p.value.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| bad(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_bytes(r: &mut impl Read, len: u64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len).read_to_end(&mut buf)?;
    if buf.len() as u64 != len {
        return Err(bad("truncated checkpoint"));
    }
    Ok(buf)
}

/// Rebuild a model from a checkpoint. Every parameter of the network must be
/// present exactly once with the expected shape.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Herman> {
    if &read_array::<4>(&mut r)? != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let header_len = read_u64(&mut r)?;
    let header: Header = serde_json::from_slice(&read_bytes(&mut r, header_len)?)
        .map_err(|e| bad(format!("bad header: {e}")))?;
    let mut model = Herman::new(header.config, header.vocab)?;

    let count = read_u32(&mut r)?;
    let mut seen = BTreeSet::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)?;
        if name_len > MAX_NAME {
            return Err(bad("tensor name too long"));
        }
        let name = String::from_utf8(read_bytes(&mut r, u64::from(name_len))?)
            .map_err(|_| bad("tensor name is not UTF-8"))?;
        let rank = read_u32(&mut r)?;
        if rank > MAX_RANK {
            return Err(bad(format!("tensor {name} has rank {rank}")));
        }
        let shape = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let id = model.store.id(&name).ok_or_else(|| bad(format!("unknown tensor {name}")))?;
        if !seen.insert(name.clone()) {
            return Err(bad(format!("duplicate tensor {name}")));
        }
        let expected = model.store.value(id).shape().to_vec();
        if shape != expected {
            return Err(bad(format!("tensor {name} has shape {shape:?}, expected {expected:?}")));
        }
        let n: usize = shape.iter().product();
        let raw = read_bytes(&mut r, 8 * n as u64)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        *model.store.value_mut(id) = Tensor::new(shape, data)?;
    }
    if seen.len() != model.store.len() {
        return Err(bad(format!("checkpoint holds {} of {} tensors", seen.len(), model.store.len())));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after last tensor"));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Herman, path: &Path) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: &Path) -> Result<Herman> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
