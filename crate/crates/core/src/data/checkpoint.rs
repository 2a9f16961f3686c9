use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamSet;
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};

use super::io::{put_f64s, read_bytes, write_atomic, Reader};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VSCK";
pub const CHECKPOINT_VERSION: u8 = 1;

/// Training provenance stored next to the weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckpointInfo {
    pub epoch: usize,
    pub val_f: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub model: Model,
    pub info: CheckpointInfo,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    feature_dim: usize,
    info: CheckpointInfo,
}

/// `magic | version u8 | header_len u32 | header JSON | count u32 |
/// count x (name_len u16 | name | rows u32 | cols u32 | rows*cols f64)`.
pub fn encode_checkpoint(ck: &ModelCheckpoint) -> Result<Vec<u8>> {
    let header = Header {
        config: ck.model.config(),
        feature_dim: ck.model.feature_dim(),
        info: ck.info.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Config(e.to_string()))?;
    let params = ck.model.params();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, m) in params {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
        put_f64s(&mut out, m.as_slice());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8], context: &str) -> Result<ModelCheckpoint> {
    let mut r = Reader::new(bytes, context);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u8()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            context: context.to_string(),
            found: version as u32,
            expected: CHECKPOINT_VERSION as u32,
        });
    }
    let len = r.u32()? as usize;
    let json = r.take(len)?;
    let header: Header = serde_json::from_slice(json).map_err(|e| r.error(format!("bad header: {e}")))?;
    let mut model = Model::zeros(header.feature_dim, &header.config)?;
    let expected: Vec<(String, (usize, usize))> =
        model.params().into_iter().map(|(n, m)| (n, m.shape())).collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(r.error(format!("{count} tensors, architecture has {}", expected.len())));
    }
    for (slot, (name, shape)) in model.params_mut().into_iter().zip(&expected) {
        let name_len = r.u16()? as usize;
        let found = r.take(name_len)?;
        if found != name.as_bytes() {
            return Err(r.error(format!(
                "tensor '{}' where '{name}' was expected",
                String::from_utf8_lossy(found)
            )));
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if (rows, cols) != *shape {
            return Err(r.error(format!("tensor '{name}' is {rows}x{cols}, expected {shape:?}")));
        }
        slot.as_mut_slice().copy_from_slice(&r.f64s(rows * cols)?);
    }
    r.finish()?;
    Ok(ModelCheckpoint {
        model,
        info: header.info,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ck: &ModelCheckpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(ck)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelCheckpoint> {
    let path = path.as_ref();
    decode_checkpoint(&read_bytes(path)?, &path.display().to_string())
}
