//! Deterministic synthetic data: a small labeled corpus with a two-level
//! label hierarchy, and larger random taxonomies.
//!
//! Every label owns a vocabulary of pseudo-words; leaf documents also borrow
//! from their parent's vocabulary, so related labels share context.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::corpus::Document;
use crate::rng::{derive_seed, rng, Rng};
use crate::taxonomy::LabelTaxonomy;

/// `(label, parent, word stem)`.
const TOY_LABELS: [(&str, Option<&str>, &str); 8] = [
    ("ECON", None, "econ"),
    ("ECON.TRADE", Some("ECON"), "trade"),
    ("ECON.MARKETS", Some("ECON"), "market"),
    ("ECON.LABOR", Some("ECON"), "labor"),
    ("SPORT", None, "sport"),
    ("SPORT.SOCCER", Some("SPORT"), "soccer"),
    ("SPORT.TENNIS", Some("SPORT"), "tennis"),
    ("SPORT.RACING", Some("SPORT"), "racing"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub documents: usize,
    /// Fraction of documents carrying exactly one label.
    pub single_fraction: f64,
    pub words_per_label: usize,
    pub filler_words: usize,
    /// Tokens per label segment.
    pub segment_len: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            documents: 60,
            single_fraction: 0.6,
            words_per_label: 30,
            filler_words: 60,
            segment_len: 40,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorpus {
    pub docs: Vec<Document>,
    pub taxonomy: LabelTaxonomy,
}

impl ToyCorpus {
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.docs
            .iter()
            .flat_map(|d| d.text.split(' ').map(str::to_string))
            .collect()
    }

    pub fn single_label(&self) -> Vec<Document> {
        self.docs.iter().filter(|d| d.labels.len() == 1).cloned().collect()
    }

    pub fn multi_label(&self) -> Vec<Document> {
        self.docs.iter().filter(|d| d.labels.len() > 1).cloned().collect()
    }
}

/// `a, b, …, z, ba, bb, …` — letters only so tokenization keeps words whole.
fn suffix(mut k: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (k % 26) as u8);
        k /= 26;
        if k == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

struct Vocab {
    words: Vec<String>,
    zipf: WeightedIndex<f64>,
}

impl Vocab {
    fn new(stem: &str, n: usize) -> Self {
        let words = (0..n).map(|k| format!("{stem}{}", suffix(k))).collect();
        let zipf = WeightedIndex::new((0..n).map(|r| 1.0 / (r as f64 + 1.0))).expect("positive weights");
        Vocab { words, zipf }
    }

    fn draw(&self, r: &mut Rng) -> &str {
        &self.words[self.zipf.sample(r)]
    }
}

pub fn toy_taxonomy() -> LabelTaxonomy {
    let mut tax = LabelTaxonomy::new();
    for (label, parent, _) in TOY_LABELS {
        match parent {
            Some(p) => tax.add_edge(p, label),
            None => {
                tax.add_label(label);
            }
        }
    }
    tax
}

pub fn toy_corpus(cfg: &ToyConfig) -> ToyCorpus {
    let vocabs: Vec<Vocab> = TOY_LABELS
        .iter()
        .map(|(_, _, stem)| Vocab::new(stem, cfg.words_per_label))
        .collect();
    let filler = Vocab::new("w", cfg.filler_words);
    let parent_of = |k: usize| {
        TOY_LABELS[k]
            .1
            .map(|p| TOY_LABELS.iter().position(|l| l.0 == p).expect("parent is listed"))
    };
    let related = |a: usize, b: usize| a == b || parent_of(a) == Some(b) || parent_of(b) == Some(a);

    let mut r = rng(cfg.seed);
    let singles = (cfg.documents as f64 * cfg.single_fraction).round() as usize;
    let mut label_sets: Vec<Vec<usize>> = (0..singles).map(|i| vec![i % TOY_LABELS.len()]).collect();
    while label_sets.len() < cfg.documents {
        let a = r.gen_range(0..TOY_LABELS.len());
        let b = r.gen_range(0..TOY_LABELS.len());
        if !related(a, b) {
            label_sets.push(vec![a, b]);
        }
    }
    label_sets.shuffle(&mut r);

    let docs = label_sets
        .iter()
        .enumerate()
        .map(|(i, labels)| {
            let mut dr = rng(derive_seed(cfg.seed, &[i as u64]));
            let mut words: Vec<&str> = Vec::new();
            for &k in labels {
                let own = &vocabs[k];
                let shared = parent_of(k).map(|p| &vocabs[p]);
                for _ in 0..cfg.segment_len {
                    let u: f64 = dr.gen();
                    let w = match shared {
                        Some(p) if (0.55..0.7).contains(&u) => p.draw(&mut dr),
                        _ if u < 0.7 => own.draw(&mut dr),
                        _ => filler.draw(&mut dr),
                    };
                    words.push(w);
                }
            }
            Document {
                id: format!("toy-{i:03}"),
                text: words.join(" "),
                labels: labels.iter().map(|&k| TOY_LABELS[k].0.to_string()).collect(),
            }
        })
        .collect();
    ToyCorpus {
        docs,
        taxonomy: toy_taxonomy(),
    }
}

/// A complete `branching`-ary tree `depth` levels below its root, plus
/// `cycles` diamonds: a deepest-level node gains a second parent (a sibling
/// of its own parent).
pub fn synthetic_taxonomy(branching: usize, depth: usize, cycles: usize, seed: u64) -> LabelTaxonomy {
    let mut tax = LabelTaxonomy::new();
    tax.add_label("n0");
    let mut parent_of = vec![usize::MAX];
    let mut level = vec![0usize];
    let mut next = 1;
    for _ in 0..depth {
        let mut below = Vec::new();
        for &p in &level {
            for _ in 0..branching {
                tax.add_edge(&format!("n{p}"), &format!("n{next}"));
                parent_of.push(p);
                below.push(next);
                next += 1;
            }
        }
        level = below;
    }
    if depth >= 2 && branching >= 2 {
        let mut r = rng(seed);
        let mut leaves = level.clone();
        leaves.shuffle(&mut r);
        for &leaf in leaves.iter().take(cycles) {
            let p = parent_of[leaf];
            let g = parent_of[p];
            let uncle = (0..next)
                .filter(|&u| u != p && parent_of.get(u) == Some(&g))
                .nth(r.gen_range(0..branching - 1))
                .expect("grandparent has other children");
            tax.add_edge(&format!("n{uncle}"), &format!("n{leaf}"));
        }
    }
    tax
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_corpus_shape() {
        let toy = toy_corpus(&ToyConfig::default());
        assert_eq!(toy.docs.len(), 60);
        assert_eq!(toy.taxonomy.len(), 8);
        assert_eq!(toy.taxonomy.edge_count(), 6);
        assert_eq!(toy.single_label().len(), 36);
        assert_eq!(toy.multi_label().len(), 24);
        let v = toy.vocabulary().len();
        assert!((250..=300).contains(&v), "vocabulary {v}");
        assert_eq!(toy, toy_corpus(&ToyConfig::default()));
        assert_ne!(
            toy.docs,
            toy_corpus(&ToyConfig {
                seed: 8,
                ..ToyConfig::default()
            })
            .docs
        );
    }

    #[test]
    fn every_label_has_single_label_documents() {
        let toy = toy_corpus(&ToyConfig::default());
        for l in toy.taxonomy.labels() {
            assert!(toy.single_label().iter().any(|d| d.labels.contains(l)), "{l}");
        }
    }

    #[test]
    fn synthetic_taxonomy_has_forty_labels_and_two_diamonds() {
        let tax = synthetic_taxonomy(3, 3, 2, 11);
        assert_eq!(tax.len(), 40);
        assert_eq!(tax.edge_count(), 39 + 2);
        let two_parents = (0..tax.len()).filter(|&i| tax.parents(i).len() == 2).count();
        assert_eq!(two_parents, 2);
    }

    #[test]
    fn suffixes_are_unique() {
        let s: BTreeSet<String> = (0..1000).map(suffix).collect();
        assert_eq!(s.len(), 1000);
    }
}
