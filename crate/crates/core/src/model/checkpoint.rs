//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `EDGECKPT`, `u32` version, `u32` header length,
//! JSON header `{config, metadata}`, `u32` tensor count, then per tensor a
//! `u32`-prefixed UTF-8 name, `u32` rows, `u32` cols and `rows * cols` `f64`s.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;

use super::{ModelConfig, ModelError, ModelParams};

pub const MAGIC: &[u8; 8] = b"EDGECKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parameters plus free-form metadata (normalization, target, etc.).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    metadata: serde_json::Value,
}

fn write_u32<W: Write>(w: &mut W, x: u32) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn len_u32(n: usize, what: &str) -> Result<u32, CheckpointError> {
    u32::try_from(n).map_err(|_| CheckpointError::Corrupt(format!("{what} too large")))
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    let header = serde_json::to_vec(&Header {
        config: *ckpt.params.config(),
        metadata: ckpt.metadata.clone(),
    })?;
    write_u32(&mut w, len_u32(header.len(), "header")?)?;
    w.write_all(&header)?;
    let tensors: Vec<_> = ckpt.params.iter().collect();
    write_u32(&mut w, len_u32(tensors.len(), "tensor count")?)?;
    for (name, t) in tensors {
        write_u32(&mut w, len_u32(name.len(), "name")?)?;
        w.write_all(name.as_bytes())?;
        write_u32(&mut w, len_u32(t.rows(), "rows")?)?;
        write_u32(&mut w, len_u32(t.cols(), "cols")?)?;
        for x in t.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let header_len = read_u32(&mut r)? as usize;
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)?;

    let count = read_u32(&mut r)?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| CheckpointError::Corrupt(format!("{name}: shape overflow")))?;
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if tensors.insert(name.clone(), Tensor::new(rows, cols, data)).is_some() {
            return Err(CheckpointError::Corrupt(format!("duplicate tensor {name}")));
        }
    }
    let params = ModelParams::from_tensors(header.config, tensors)?;
    Ok(Checkpoint {
        params,
        metadata: header.metadata,
    })
}

impl Checkpoint {
    pub fn save(&self, path: &std::path::Path) -> Result<(), CheckpointError> {
        let f = std::fs::File::create(path)?;
        write_checkpoint(std::io::BufWriter::new(f), self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CheckpointError> {
        let f = std::fs::File::open(path)?;
        read_checkpoint(std::io::BufReader::new(f))
    }
}
