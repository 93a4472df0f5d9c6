//! Checkpoint container: an 8-byte magic, a little-endian `u64` header
//! length, a JSON header, then every tensor as little-endian `f32` in header
//! order.

use std::fs;
use std::io::Write;
use std::path::Path;

use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::model::{build_model, Model};
use crate::episode::NormStats;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SPOTSCK1";
const FORMAT_VERSION: u32 = 1;

/// Metadata stored alongside the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub config: ModelConfig,
    pub seed: u64,
    /// Optimizer steps taken.
    pub step: u64,
    pub epoch: usize,
    /// Tactile normalization the model was trained with.
    pub norm: Option<NormStats>,
    pub val_total: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    buffer: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    config_hash: String,
    info: CheckpointInfo,
    tensors: Vec<TensorEntry>,
}

/// Hex SHA-256 of the config's canonical JSON encoding.
pub fn config_hash(config: &ModelConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn tensor_bytes(t: &Tensor, out: &mut Vec<u8>) -> Result<()> {
    let v: Vec<f32> = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
    out.reserve(v.len() * 4);
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(())
}

/// Writes atomically (temp file + rename).
pub fn save_checkpoint(model: &Model, info: &CheckpointInfo, path: &Path) -> Result<()> {
    if &info.config != model.config() || info.seed != model.seed() {
        return Err(Error::Checkpoint("checkpoint info does not describe this model".into()));
    }
    let params = model.store().params();
    let buffers = model.store().buffers();
    let mut tensors = Vec::with_capacity(params.len() + buffers.len());
    let mut data = Vec::new();
    for (map, buffer) in [(&params, false), (&buffers, true)] {
        for (name, var) in map {
            tensors.push(TensorEntry {
                name: name.clone(),
                shape: var.dims().to_vec(),
                buffer,
            });
            tensor_bytes(var.as_tensor(), &mut data)?;
        }
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        config_hash: config_hash(&info.config)?,
        info: info.clone(),
        tensors,
    };
    let header = serde_json::to_vec(&header)?;

    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Checkpoint(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(MAGIC)?;
        f.write_all(&(header.len() as u64).to_le_bytes())?;
        f.write_all(&header)?;
        f.write_all(&data)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Reads only the metadata.
pub fn read_checkpoint_info(path: &Path) -> Result<CheckpointInfo> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_header(&bytes)?.0.info)
}

fn parse_header(bytes: &[u8]) -> Result<(Header, usize)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let end = 16usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..end])?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {}", header.format_version)));
    }
    let expected = config_hash(&header.info.config)?;
    if expected != header.config_hash {
        return Err(Error::Checkpoint(format!(
            "config hash mismatch: header says {}, config hashes to {expected}",
            header.config_hash
        )));
    }
    Ok((header, end))
}

/// Rebuilds the model from its stored config and seed, then loads the
/// weights. Every stored tensor must match the rebuilt model exactly.
pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointInfo)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, mut offset) = parse_header(&bytes)?;
    let model = build_model(&header.info.config, header.info.seed)?;
    let params = model.store().params();
    let buffers = model.store().buffers();
    if header.tensors.len() != params.len() + buffers.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} tensors, model has {}",
            header.tensors.len(),
            params.len() + buffers.len()
        )));
    }
    for entry in &header.tensors {
        let map = if entry.buffer { &buffers } else { &params };
        let var = map
            .get(&entry.name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {}", entry.name)))?;
        if var.dims() != entry.shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "tensor {} has shape {:?}, model expects {:?}",
                entry.name,
                entry.shape,
                var.dims()
            )));
        }
        let n: usize = entry.shape.iter().product();
        let end = offset + 4 * n;
        let raw = bytes
            .get(offset..end)
            .ok_or_else(|| Error::Checkpoint(format!("data for {} is truncated", entry.name)))?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let t = Tensor::from_vec(values, entry.shape.as_slice(), var.device())?.to_dtype(var.dtype())?;
        var.set(&t)?;
        offset = end;
    }
    if offset != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after tensor data".into()));
    }
    Ok((model, header.info))
}
