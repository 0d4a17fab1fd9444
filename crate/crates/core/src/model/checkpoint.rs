//! Checkpoint container.
//!
//! ```text
//! magic      8 bytes   "SRCKPT\0\x01"
//! header_len u64 LE
//! header     JSON      {format_version, config, vocab_fingerprint, step, tensors: [{name, shape, offset}]}
//! data       f64 LE    every tensor in header order, row-major; offset counts values
//! ```
//!
//! Identical state always serializes to identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{Float, ModelParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SRCKPT\0\x01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: ModelConfig,
    pub vocab_fingerprint: String,
    pub step: u64,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<F> {
    pub params: ModelParams<F>,
    pub vocab_fingerprint: String,
    pub step: u64,
}

impl<F: Float> Checkpoint<F> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let named = self.params.named();
        let mut tensors = Vec::with_capacity(named.len());
        let mut offset = 0;
        for (name, t) in &named {
            tensors.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.len();
        }
        let header = serde_json::to_vec(&CheckpointHeader {
            format_version: FORMAT_VERSION,
            config: self.params.config.clone(),
            vocab_fingerprint: self.vocab_fingerprint.clone(),
            step: self.step,
            tensors,
        })?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &named {
            for v in t.iter() {
                out.extend_from_slice(&v.to_f64().expect("finite").to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let data_start = 16usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[16..data_start])?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format_version {}", header.format_version)));
        }
        header.config.validate()?;
        let data = &bytes[data_start..];
        let mut params = ModelParams::<F>::zeros(&header.config);
        let named = params.named_mut();
        if named.len() != header.tensors.len() {
            return Err(bad("tensor count does not match config"));
        }
        for ((name, mut t), entry) in named.into_iter().zip(&header.tensors) {
            if name != entry.name || t.shape() != entry.shape.as_slice() {
                return Err(Error::Checkpoint(format!("tensor {} does not match config", entry.name)));
            }
            let end = (entry.offset + t.len()) * 8;
            let raw = data.get(entry.offset * 8..end).ok_or_else(|| bad("truncated tensor data"))?;
            for (dst, chunk) in t.iter_mut().zip(raw.chunks_exact(8)) {
                *dst = F::of(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
            }
        }
        if !params.all_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(Checkpoint {
            params,
            vocab_fingerprint: header.vocab_fingerprint,
            step: header.step,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => e.into(),
        })?;
        Self::from_bytes(&bytes)
    }
}
