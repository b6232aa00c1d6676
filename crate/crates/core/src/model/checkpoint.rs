//! `AGCR` checkpoint files.
//!
//! Metadata holds the configuration, progress counters and a tensor
//! directory (name, shape, byte offset into the payload). The payload is the
//! parameters followed by Adam's first and second moments, all `f32` LE.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::Network;
use super::train::Model;
use crate::binio::{self, Cursor};
use crate::error::{Error, Result};
use crate::numerics::{AdamState, LayerParams, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AGCR";
pub const CHECKPOINT_VERSION: u32 = 1;

const M_PREFIX: &str = "adam.m/";
const V_PREFIX: &str = "adam.v/";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    config: ModelConfig,
    epoch: usize,
    seed: u64,
    adam_t: u64,
    tensors: Vec<TensorEntry>,
}

pub fn checkpoint_bytes(model: &Model) -> Vec<u8> {
    let params = &model.net.params;
    let mut tensors = Vec::new();
    let mut payload = Vec::new();
    let mut push = |name: String, shape: &[usize], data: &[f32], payload: &mut Vec<u8>| {
        tensors.push(TensorEntry {
            name,
            shape: shape.to_vec(),
            offset: payload.len(),
        });
        binio::put_f32s(payload, data);
    };
    for (name, p) in params.iter() {
        push(name.to_string(), p.value.shape(), p.value.data(), &mut payload);
    }
    for (k, (name, p)) in params.iter().enumerate() {
        push(
            format!("{M_PREFIX}{name}"),
            p.value.shape(),
            &model.adam.m[k],
            &mut payload,
        );
    }
    for (k, (name, p)) in params.iter().enumerate() {
        push(
            format!("{V_PREFIX}{name}"),
            p.value.shape(),
            &model.adam.v[k],
            &mut payload,
        );
    }
    let meta = Meta {
        config: model.net.cfg.clone(),
        epoch: model.epoch,
        seed: model.net.cfg.training.seed,
        adam_t: model.adam.t,
        tensors,
    };
    let meta = serde_json::to_string(&meta).expect("checkpoint metadata serializes");
    let mut out = Vec::with_capacity(binio::HEADER_FIXED + meta.len() + payload.len());
    binio::write_header(&mut out, &CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &meta);
    out.extend_from_slice(&payload);
    out
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Model> {
    let (meta, payload) = binio::read_header(bytes, &CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let meta: Meta = serde_json::from_str(meta).map_err(|e| Error::Metadata(e.to_string()))?;
    let mut cursor = Cursor::new(payload);
    let mut consumed = 0;
    let mut params = LayerParams::new();
    let (mut m, mut v) = (Vec::new(), Vec::new());
    for entry in &meta.tensors {
        if entry.offset != consumed {
            return Err(Error::Metadata(format!(
                "tensor `{}` declared at byte {}, expected {consumed}",
                entry.name, entry.offset
            )));
        }
        let n: usize = entry.shape.iter().product();
        let data = cursor.f32s(n, &entry.name)?;
        consumed += n * 4;
        if let Some(base) = entry.name.strip_prefix(M_PREFIX) {
            check_moment(&params, base, &entry.shape, m.len())?;
            m.push(data);
        } else if let Some(base) = entry.name.strip_prefix(V_PREFIX) {
            check_moment(&params, base, &entry.shape, v.len())?;
            v.push(data);
        } else {
            params.insert(&entry.name, Tensor::new(entry.shape.clone(), data)?);
        }
    }
    cursor.finish()?;
    if m.len() != params.len() || v.len() != params.len() {
        return Err(Error::Metadata("optimizer state does not cover every parameter".into()));
    }
    let net = Network::from_params(&meta.config, params)?;
    Ok(Model {
        net,
        adam: AdamState { t: meta.adam_t, m, v },
        epoch: meta.epoch,
    })
}

fn check_moment(params: &LayerParams<f32>, name: &str, shape: &[usize], k: usize) -> Result<()> {
    match params.iter().nth(k) {
        Some((n, p)) if n == name && p.value.shape() == shape => Ok(()),
        _ => Err(Error::Metadata(format!(
            "optimizer tensor for `{name}` is out of place"
        ))),
    }
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
