//! The attentional recurrent convolution + capsule network, its ablation
//! variants, training, checkpoints and attention export.

mod checkpoint;
mod config;
mod network;
mod train;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{grad_check, Real, Tensor, GRAD_CHECK_EPS};
use crate::rng::rng;
use crate::wordvec::DocTensor;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{Dims, Flags, LossKind, ModelConfig, TrainConfig, Variant};
pub use network::{ForwardTrace, HeadTrace, LayerTrace, Network, Target};
pub use train::{evaluate, predict, score_all, train, EpochLog, Model, Sample, TrainOptions};

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Metadata(format!("csv: {e}"))
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

/// `doc_id,row,layer,block,alpha` for every attention scalar each document
/// uses.
pub fn attention_csv(net: &Network<f32>, docs: &[&DocTensor]) -> Result<String> {
    let mut rows = Vec::new();
    for doc in docs {
        for (r, layer, block, a) in net.attention_records(doc)? {
            rows.push(vec![
                doc.doc_id.clone(),
                r.to_string(),
                layer.to_string(),
                block.to_string(),
                a.to_string(),
            ]);
        }
    }
    csv_string(&["doc_id", "row", "layer", "block", "alpha"], rows)
}

/// `doc_id,label,length`: one line per label per document.
pub fn lengths_csv(net: &Network<f32>, docs: &[&DocTensor], serial: bool) -> Result<String> {
    let scores = score_all(net, docs, serial)?;
    let rows = docs.iter().zip(&scores).flat_map(|(doc, lengths)| {
        net.cfg
            .label_names
            .iter()
            .zip(lengths)
            .map(|(l, v)| vec![doc.doc_id.clone(), l.clone(), v.to_string()])
            .collect::<Vec<_>>()
    });
    csv_string(&["doc_id", "label", "length"], rows)
}

/// Writes both CSVs; fails if the model has no attention.
pub fn export_attention(
    net: &Network<f32>,
    docs: &[&DocTensor],
    attention_path: &Path,
    lengths_path: &Path,
    serial: bool,
) -> Result<()> {
    let attn = attention_csv(net, docs)?;
    let lens = lengths_csv(net, docs, serial)?;
    fs::write(attention_path, attn).map_err(|e| Error::io(attention_path, e))?;
    fs::write(lengths_path, lens).map_err(|e| Error::io(lengths_path, e))
}

/// Smallest dimensions that still exercise every layer.
pub fn tiny_config(variant: Variant) -> ModelConfig {
    let dims = Dims {
        n: 2,
        t: 8,
        d: 4,
        k1: 3,
        k2: 4,
        m: 3,
        caps_channels: 2,
        digit_dim: 4,
        labels: 3,
        stride: 1,
        primary_width: None,
        fc_hidden: 5,
    };
    let labels = (0..dims.labels).map(|k| format!("label{k}")).collect();
    ModelConfig::new(variant, dims, TrainConfig::default(), labels)
}

/// A document with random word vectors and a fixed two-row block pattern.
pub fn random_doc(cfg: &ModelConfig, seed: u64) -> DocTensor {
    let d = cfg.dims;
    let mut doc = DocTensor::empty("probe", d.n, d.t, d.d);
    let mut r = rng(seed);
    for row in 0..d.n {
        // row 0 holds two blocks, later rows shrink and end in padding
        let words = d.t.saturating_sub(row * 2).max(1);
        for c in 0..words {
            let cell = row * d.t + c;
            doc.mask[cell] = 1;
            doc.blocks[cell] = if row == 0 && c >= words / 2 { 2 } else { 1 };
            let v = Tensor::<f64>::uniform(&[d.d], 1.0, &mut r);
            for (k, x) in v.data().iter().enumerate() {
                doc.data[cell * d.d + k] = *x as f32;
            }
        }
    }
    doc
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Worst relative error per parameter tensor.
    pub groups: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max(&self) -> f64 {
        self.groups.iter().map(|g| g.1).fold(0.0, f64::max)
    }
}

/// Central-difference check of the full network loss w.r.t. every parameter,
/// in `f64`. Parameters are re-drawn away from zero so no ReLU sits exactly on
/// its kink.
pub fn gradcheck_model(cfg: &ModelConfig, seed: u64) -> Result<GradCheckReport> {
    let mut net = Network::<f64>::init(cfg)?;
    let mut r = rng(seed);
    let names: Vec<String> = net.params.names().map(str::to_string).collect();
    for (name, p) in net.params.iter_mut() {
        let fresh = Tensor::<f64>::uniform(p.value.shape(), 0.5, &mut r);
        let shift = if name.ends_with(".attn") { 1.0 } else { 0.0 };
        for (v, f) in p.value.data_mut().iter_mut().zip(fresh.data()) {
            *v = f + shift;
        }
    }
    let doc = random_doc(cfg, seed ^ 0x5eed);
    let l = cfg.dims.labels;
    let target = Target {
        labels: (0..l).map(|k| k % 2 == 0).collect(),
        alpha: Some((0..l).map(|k| 0.25 + 0.5 * (k as f64) / l as f64).collect()),
    };
    let p = 0.8;
    let (_, grads) = net.loss_and_grad(&doc, &target, p)?;
    let base = net.flat_values();
    let ranges = net.flat_ranges();
    let mut probe = net.clone();
    let mut groups = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let (off, len) = ranges[name];
        let err = grad_check(
            |v| {
                let mut flat = base.clone();
                flat[off..off + len].copy_from_slice(v);
                probe.set_flat_values(&flat);
                probe.loss(&doc, &target, p).expect("probe loss").as_f64()
            },
            &base[off..off + len],
            &grads[k],
            GRAD_CHECK_EPS,
        );
        groups.push((name.clone(), err));
    }
    Ok(GradCheckReport { groups })
}

/// Maximum absolute difference between two score vectors.
pub fn max_abs_diff<R: Real>(a: &[R], b: &[R]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.as_f64() - y.as_f64()).abs())
        .fold(0.0, f64::max)
}
