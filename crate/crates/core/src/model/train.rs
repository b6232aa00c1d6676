use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{Network, Target};
use crate::error::{Error, Result};
use crate::metrics::{confusion, MetricsReport};
use crate::numerics::{adam_step, AdamConfig, AdamState};
use crate::rng::{derive_seed, rng};
use crate::wordvec::DocTensor;

/// A document and what it should be classified as.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tensor: DocTensor,
    pub target: Target,
}

impl Sample {
    pub fn label_set(&self) -> BTreeSet<usize> {
        self.target
            .labels
            .iter()
            .enumerate()
            .filter_map(|(k, &on)| on.then_some(k))
            .collect()
    }
}

/// Network plus optimizer state: everything a checkpoint stores.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: Network<f32>,
    pub adam: AdamState<f32>,
    /// Completed epochs.
    pub epoch: usize,
}

impl Model {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let net = Network::init(cfg)?;
        let adam = AdamState::new(&net.params);
        Ok(Model { net, adam, epoch: 0 })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.cfg
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Adjustment factor for the weighted margin loss.
    pub p: f64,
    /// Run every document on the calling thread.
    pub serial: bool,
    /// Worker count for parallel mode; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            p: 1.0,
            serial: true,
            threads: None,
        }
    }
}

/// Runs `f` on a dedicated pool when a thread count is given.
pub(crate) fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn map_docs<T: Send>(serial: bool, items: &[usize], f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    if serial {
        items.iter().map(|&i| f(i)).collect()
    } else {
        items.par_iter().map(|&i| f(i)).collect()
    }
}

/// `{k : length_k >= threshold}`, or the arg-max label when that is empty.
pub fn predict(lengths: &[f32], threshold: f64) -> BTreeSet<usize> {
    let picked: BTreeSet<usize> = lengths
        .iter()
        .enumerate()
        .filter(|(_, &l)| l as f64 >= threshold)
        .map(|(k, _)| k)
        .collect();
    if !picked.is_empty() || lengths.is_empty() {
        return picked;
    }
    let best = lengths
        .iter()
        .enumerate()
        .fold(0, |best, (k, &l)| if l > lengths[best] { k } else { best });
    BTreeSet::from([best])
}

/// Class scores for every document, in input order.
pub fn score_all(net: &Network<f32>, docs: &[&DocTensor], serial: bool) -> Result<Vec<Vec<f32>>> {
    let idx: Vec<usize> = (0..docs.len()).collect();
    map_docs(serial, &idx, |i| net.lengths(docs[i]))
}

pub fn evaluate(net: &Network<f32>, samples: &[Sample], threshold: f64, serial: bool) -> Result<MetricsReport> {
    let docs: Vec<&DocTensor> = samples.iter().map(|s| &s.tensor).collect();
    let scores = score_all(net, &docs, serial)?;
    let predicted: Vec<BTreeSet<usize>> = scores.iter().map(|l| predict(l, threshold)).collect();
    let truth: Vec<BTreeSet<usize>> = samples.iter().map(Sample::label_set).collect();
    let counts = confusion(&predicted, &truth, net.cfg.dims.labels);
    Ok(MetricsReport::new(&net.cfg.label_names, &counts, threshold))
}

/// Mini-batch Adam from `model.epoch` up to the configured epoch count.
///
/// Per-document gradients may be computed in parallel but are always summed
/// in batch order, so serial and parallel runs produce identical bits.
pub fn train(
    model: &mut Model,
    data: &[Sample],
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochLog) -> Result<()> + Send,
) -> Result<Vec<EpochLog>> {
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let cfg = model.net.cfg.clone();
    let tc = cfg.training;
    let adam_cfg = AdamConfig {
        lr: tc.lr,
        ..AdamConfig::default()
    };
    with_pool(opts.threads, || {
        let mut logs = Vec::new();
        while model.epoch < tc.epochs {
            let start = Instant::now();
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng(derive_seed(tc.seed, &[model.epoch as u64])));
            let mut total = 0.0f64;
            for batch in order.chunks(tc.batch) {
                let net = &model.net;
                let results = map_docs(opts.serial, batch, |i| {
                    net.loss_and_grad(&data[i].tensor, &data[i].target, opts.p)
                })?;
                model.net.params.zero_grad();
                for (loss, grads) in &results {
                    total += *loss as f64;
                    model.net.params.accumulate(grads);
                }
                model.net.params.scale_grads(1.0 / batch.len() as f32);
                adam_step(&mut model.net.params, &mut model.adam, &adam_cfg);
            }
            let loss = total / data.len() as f64;
            if !loss.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            model.epoch += 1;
            let report = evaluate(&model.net, data, tc.threshold, opts.serial)?;
            let log = EpochLog {
                epoch: model.epoch,
                loss,
                micro_f1: report.micro_f1,
                macro_f1: report.macro_f1,
                seconds: start.elapsed().as_secs_f64(),
            };
            on_epoch(&log)?;
            logs.push(log);
        }
        Ok(logs)
    })?
}
