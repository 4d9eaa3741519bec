//! `KPM1` model checkpoints:
//! `"KPM1" | u32 version | u32 layer count L | L u32 dims | f32 params`,
//! little-endian, parameters in declaration order.

use std::fs;
use std::path::Path;

use super::mlp::MlpModel;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"KPM1";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * (model.dims().len() + model.num_params()));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.dims().len() as u32).to_le_bytes());
    for &d in model.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpModel> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(i..i + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))
    };
    if bytes.get(..4) != Some(MODEL_MAGIC.as_slice()) {
        return Err(Error::Format("bad magic, expected KPM1".into()));
    }
    let version = word(4)?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = word(8)? as usize;
    if count > (bytes.len() - 12) / 4 {
        return Err(Error::Format("layer count exceeds file size".into()));
    }
    let dims = (0..count)
        .map(|k| word(12 + 4 * k).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let body = &bytes[12 + 4 * count..];
    if !body.len().is_multiple_of(4) {
        return Err(Error::Format("parameter block is not a whole number of f32".into()));
    }
    let params = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    MlpModel::from_params(dims, params).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_model(path: impl AsRef<Path>, model: &MlpModel) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    decode_model(&fs::read(path)?)
}
