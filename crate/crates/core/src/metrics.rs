//! Micro- and macro-averaged F1 over per-label confusion counts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Counts { tp, fp, fn_ }
    }

    pub fn f1(&self) -> f64 {
        f1_from(self.tp, self.fp, self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_from(tp: u64, fp: u64, fn_: u64) -> f64 {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// F1 of the precision and recall pooled over all labels.
pub fn micro_f1(counts: &[Counts]) -> f64 {
    let (tp, fp, fn_) = counts
        .iter()
        .fold((0, 0, 0), |(a, b, c), k| (a + k.tp, b + k.fp, c + k.fn_));
    f1_from(tp, fp, fn_)
}

/// Unweighted mean of per-label F1; labels with `P + R = 0` count as 0.
pub fn macro_f1(counts: &[Counts]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    counts.iter().map(Counts::f1).sum::<f64>() / counts.len() as f64
}

/// Per-label counts from predicted and true label-index sets.
pub fn confusion(predicted: &[BTreeSet<usize>], truth: &[BTreeSet<usize>], num_labels: usize) -> Vec<Counts> {
    let mut counts = vec![Counts::default(); num_labels];
    for (pred, gold) in predicted.iter().zip(truth) {
        for &k in pred {
            if gold.contains(&k) {
                counts[k].tp += 1;
            } else {
                counts[k].fp += 1;
            }
        }
        for &k in gold.difference(pred) {
            counts[k].fn_ += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub f1: f64,
}

/// The evaluation report written by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_label: Vec<LabelMetrics>,
    pub threshold: f64,
}

impl MetricsReport {
    pub fn new(labels: &[String], counts: &[Counts], threshold: f64) -> Self {
        MetricsReport {
            micro_f1: micro_f1(counts),
            macro_f1: macro_f1(counts),
            per_label: labels
                .iter()
                .zip(counts)
                .map(|(l, c)| LabelMetrics {
                    label: l.clone(),
                    tp: c.tp,
                    fp: c.fp,
                    fn_: c.fn_,
                    f1: c.f1(),
                })
                .collect(),
            threshold,
        }
    }
}
