//! Label hierarchy: meta-path walks, label vectors and the per-document
//! alpha weights that scale the negative part of the margin loss.
//!
//! Two meta-paths guide the walks. Child-Father-Child climbs to a parent
//! and descends to one of its children; Father-Child-Father does the
//! reverse. Consecutive moves must keep alternating direction, so every
//! interior node of a walk is either a common parent or a common child of
//! its two neighbours.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{macro_f1, micro_f1, Counts};
use crate::rng::{derive_seed, fnv1a, rng, Rng};
use crate::skipgram::{cosine_similarity, train_skipgram, EmbeddingTable, SkipgramConfig};

/// Directed parent -> child graph over labels. Cycles and self-loops are
/// allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTaxonomy {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    edges: BTreeSet<(usize, usize)>,
}

impl LabelTaxonomy {
    pub fn new() -> Self {
        LabelTaxonomy {
            labels: Vec::new(),
            index: HashMap::new(),
            parents: Vec::new(),
            children: Vec::new(),
            edges: BTreeSet::new(),
        }
    }

    pub fn add_label(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        self.parents.push(Vec::new());
        self.children.push(Vec::new());
        i
    }

    pub fn add_edge(&mut self, parent: &str, child: &str) {
        let p = self.add_label(parent);
        let c = self.add_label(child);
        if self.edges.insert((p, c)) {
            let pos = self.children[p].partition_point(|&x| x < c);
            self.children[p].insert(pos, c);
            let pos = self.parents[c].partition_point(|&x| x < p);
            self.parents[c].insert(pos, p);
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn parents(&self, id: usize) -> &[usize] {
        &self.parents[id]
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_parent(&self, parent: usize, child: usize) -> bool {
        self.edges.contains(&(parent, child))
    }

    /// Distinct unordered pairs joined by at least one edge; self-loops are
    /// dropped.
    pub fn undirected_edges(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let mut linked = vec![false; self.len()];
        for &(p, c) in &self.edges {
            linked[p] = true;
            linked[c] = true;
            out.push_str(&format!("{}\t{}\n", self.labels[p], self.labels[c]));
        }
        for (i, l) in self.labels.iter().enumerate() {
            if !linked[i] {
                out.push_str(l);
                out.push('\n');
            }
        }
        out
    }
}

impl Default for LabelTaxonomy {
    fn default() -> Self {
        Self::new()
    }
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<LabelTaxonomy> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_taxonomy(&text, path)
}

/// `parent<TAB>child` per line; a single-column line declares a label with
/// no edges.
pub fn parse_taxonomy(text: &str, path: &Path) -> Result<LabelTaxonomy> {
    let mut tax = LabelTaxonomy::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        match fields.as_slice() {
            [label] => {
                tax.add_label(label);
            }
            [parent, child] if !parent.is_empty() && !child.is_empty() => tax.add_edge(parent, child),
            _ => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    "expected `parent<TAB>child` or a single label",
                ))
            }
        }
    }
    if tax.is_empty() {
        return Err(Error::EmptyTaxonomy);
    }
    Ok(tax)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkStrategy {
    #[default]
    MetaPath,
    /// Plain uniform walk over the undirected graph, for comparison.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    /// Maximum number of transitions per walk.
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub strategy: WalkStrategy,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            steps: 500,
            seed: 1,
            strategy: WalkStrategy::MetaPath,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Hop {
    Up,
    Down,
}

fn pick(rng: &mut Rng, from: &[usize]) -> usize {
    from[rng.gen_range(0..from.len())]
}

fn metapath_walk(tax: &LabelTaxonomy, start: usize, steps: usize, rng: &mut Rng) -> Vec<usize> {
    let mut walk = vec![start];
    let mut last: Option<Hop> = None;
    while walk.len() - 1 < steps {
        let cur = *walk.last().unwrap();
        // child-father-child opens with an upward hop, father-child-father
        // with a downward one; neither may repeat the previous direction
        let cfc = !tax.parents[cur].is_empty() && last != Some(Hop::Up);
        let fcf = !tax.children[cur].is_empty() && last != Some(Hop::Down);
        let prefer_cfc = rng.gen_bool(0.5);
        let use_cfc = match (cfc, fcf) {
            (false, false) => break,
            (true, false) => true,
            (false, true) => false,
            (true, true) => prefer_cfc,
        };
        let (mid, end) = if use_cfc {
            let mid = pick(rng, &tax.parents[cur]);
            (mid, &tax.children[mid])
        } else {
            let mid = pick(rng, &tax.children[cur]);
            (mid, &tax.parents[mid])
        };
        walk.push(mid);
        if walk.len() - 1 == steps {
            break;
        }
        walk.push(pick(rng, end));
        last = Some(if use_cfc { Hop::Down } else { Hop::Up });
    }
    walk
}

fn uniform_walk(neighbours: &[Vec<usize>], start: usize, steps: usize, rng: &mut Rng) -> Vec<usize> {
    let mut walk = vec![start];
    while walk.len() - 1 < steps {
        let nb = &neighbours[*walk.last().unwrap()];
        if nb.is_empty() {
            break;
        }
        walk.push(pick(rng, nb));
    }
    walk
}

/// Walks from every label, `walks_per_node` each, in label order. Each walk
/// draws from its own stream seeded by (seed, label id, walk index), so the
/// result does not depend on scheduling.
pub fn metapath_walks(tax: &LabelTaxonomy, cfg: &WalkConfig) -> Vec<Vec<usize>> {
    let neighbours: Vec<Vec<usize>> = (0..tax.len())
        .map(|i| {
            let set: BTreeSet<usize> = tax.parents[i].iter().chain(&tax.children[i]).copied().collect();
            set.into_iter().collect()
        })
        .collect();
    (0..tax.len())
        .into_par_iter()
        .flat_map_iter(|start| {
            let label_key = fnv1a(tax.labels[start].as_bytes());
            let neighbours = &neighbours;
            (0..cfg.walks_per_node).map(move |w| {
                let mut r = rng(derive_seed(cfg.seed, &[label_key, w as u64]));
                match cfg.strategy {
                    WalkStrategy::MetaPath => metapath_walk(tax, start, cfg.steps, &mut r),
                    WalkStrategy::Uniform => uniform_walk(neighbours, start, cfg.steps, &mut r),
                }
            })
        })
        .collect()
}

/// True when every interior node is a shared parent or a shared child of
/// its two neighbours.
pub fn walk_is_valid(tax: &LabelTaxonomy, walk: &[usize]) -> bool {
    walk.windows(3).all(|w| {
        let (a, b, c) = (w[0], w[1], w[2]);
        (tax.is_parent(b, a) && tax.is_parent(b, c)) || (tax.is_parent(a, b) && tax.is_parent(c, b))
    })
}

/// Label vectors aligned with the taxonomy's label order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEmbedding {
    pub table: EmbeddingTable,
}

impl LabelEmbedding {
    pub fn vector(&self, label: &str) -> Option<&[f32]> {
        self.table.get(label)
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    /// Re-key an arbitrary table to `labels`; absent labels get zeros.
    pub fn from_table(table: &EmbeddingTable, labels: &[String]) -> Result<Self> {
        let dim = table.dim();
        let mut vectors = Vec::with_capacity(labels.len() * dim);
        for l in labels {
            match table.get(l) {
                Some(v) => vectors.extend_from_slice(v),
                None => {
                    log::warn!("label `{l}` has no embedding; using the zero vector");
                    vectors.extend(std::iter::repeat_n(0.0, dim));
                }
            }
        }
        let mut t = EmbeddingTable::new(labels.to_vec(), dim, vectors)?;
        t.meta = table.meta;
        Ok(LabelEmbedding { table: t })
    }
}

pub fn embed_labels(tax: &LabelTaxonomy, walk_cfg: &WalkConfig, sg_cfg: &SkipgramConfig) -> Result<LabelEmbedding> {
    if tax.is_empty() {
        return Err(Error::EmptyTaxonomy);
    }
    let walks: Vec<Vec<&str>> = metapath_walks(tax, walk_cfg)
        .into_iter()
        .map(|w| w.into_iter().map(|i| tax.labels[i].as_str()).collect())
        .collect();
    let table = train_skipgram(&walks, sg_cfg)?;
    LabelEmbedding::from_table(&table, tax.labels())
}

/// Alpha weight for every negative label of one document, in label order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlphaTable {
    pub alphas: IndexMap<String, f64>,
}

impl AlphaTable {
    pub fn total(&self) -> f64 {
        self.alphas.values().sum()
    }

    /// Dense vector over `labels`; positives (absent from the table) get 0.
    pub fn dense(&self, labels: &[String]) -> Vec<f64> {
        labels
            .iter()
            .map(|l| self.alphas.get(l).copied().unwrap_or(0.0))
            .collect()
    }
}

/// `alpha_k = 1 - max_t cos(vec(t), vec(k))` over the positives `t`,
/// clamped into [0, 1]. Labels without a vector behave as zero vectors.
pub fn alpha_weights(emb: &LabelEmbedding, positives: &BTreeSet<String>, all_labels: &[String]) -> Result<AlphaTable> {
    if positives.is_empty() {
        return Err(Error::Config("alpha weights need at least one positive label".into()));
    }
    let known: BTreeSet<&str> = all_labels.iter().map(String::as_str).collect();
    if let Some(bad) = positives.iter().find(|p| !known.contains(p.as_str())) {
        return Err(Error::UnknownLabel(bad.clone()));
    }
    let zero = vec![0.0f32; emb.dim()];
    let vec_of = |l: &str| -> &[f32] {
        match emb.vector(l) {
            Some(v) => v,
            None => {
                log::warn!("label `{l}` missing from the label embedding");
                &zero
            }
        }
    };
    let pos_vecs: Vec<&[f32]> = positives.iter().map(|p| vec_of(p)).collect();
    let mut alphas = IndexMap::new();
    for label in all_labels.iter().filter(|l| !positives.contains(*l)) {
        let v = vec_of(label);
        let mut best = f64::NEG_INFINITY;
        for p in &pos_vecs {
            best = best.max(cosine_similarity(p, v)?);
        }
        alphas.insert(label.clone(), (1.0 - best).clamp(0.0, 1.0));
    }
    Ok(AlphaTable { alphas })
}

/// `p = 1 / mean_doc(sum_k alpha_k)`, so that `p * sum_k alpha_k` averages
/// to one over the given documents.
pub fn calibrate_p(tables: &[AlphaTable]) -> Result<f64> {
    if tables.is_empty() {
        return Err(Error::Config("cannot calibrate p without documents".into()));
    }
    let mean = tables.iter().map(AlphaTable::total).sum::<f64>() / tables.len() as f64;
    if mean <= 0.0 {
        return Err(Error::ZeroAlphaMass);
    }
    Ok(1.0 / mean)
}

pub fn resolve_p(tables: &[AlphaTable], p_override: Option<f64>) -> Result<f64> {
    match p_override {
        Some(p) if p > 0.0 => Ok(p),
        Some(p) => Err(Error::Config(format!("p override must be positive, got {p}"))),
        None => calibrate_p(tables),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionPoint {
    pub threshold: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Predict an undirected edge between two labels whenever their cosine
/// similarity reaches `threshold`, and score the prediction against the true
/// (undirected) taxonomy edges. Each label's incident edges are its
/// instances for the F1 averages.
pub fn reconstruct_eval(
    emb: &LabelEmbedding,
    tax: &LabelTaxonomy,
    thresholds: &[f64],
) -> Result<Vec<ReconstructionPoint>> {
    let n = tax.len();
    let zero = vec![0.0f32; emb.dim()];
    let vecs: Vec<&[f32]> = tax.labels().iter().map(|l| emb.vector(l).unwrap_or(&zero)).collect();
    let mut sims = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            sims.push(((a, b), cosine_similarity(vecs[a], vecs[b])?));
        }
    }
    let truth = tax.undirected_edges();
    let mut out = Vec::with_capacity(thresholds.len());
    for &th in thresholds {
        let mut counts = vec![Counts::default(); n];
        let mut matched = BTreeSet::new();
        for &((a, b), s) in &sims {
            if s >= th {
                let hit = truth.contains(&(a, b));
                for k in [a, b] {
                    if hit {
                        counts[k].tp += 1;
                    } else {
                        counts[k].fp += 1;
                    }
                }
                if hit {
                    matched.insert((a, b));
                }
            }
        }
        for &(a, b) in truth.difference(&matched) {
            counts[a].fn_ += 1;
            counts[b].fn_ += 1;
        }
        let (tp, fp, fn_) = counts
            .iter()
            .fold((0u64, 0u64, 0u64), |(x, y, z), c| (x + c.tp, y + c.fp, z + c.fn_));
        out.push(ReconstructionPoint {
            threshold: th,
            micro_f1: micro_f1(&counts),
            macro_f1: macro_f1(&counts),
            precision: if tp + fp == 0 {
                0.0
            } else {
                tp as f64 / (tp + fp) as f64
            },
            recall: if tp + fn_ == 0 {
                0.0
            } else {
                tp as f64 / (tp + fn_) as f64
            },
        });
    }
    Ok(out)
}

/// Thresholds from -1 to 1 in steps of 0.02.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| -1.0 + 0.02 * i as f64).collect()
}

/// Best expected micro-F1 of a predictor that picks pairs at random:
/// predicting every pair, `2d / (1 + d)` with `d` the edge density.
pub fn random_edge_baseline(tax: &LabelTaxonomy) -> f64 {
    let n = tax.len() as f64;
    let pairs = n * (n - 1.0) / 2.0;
    if pairs == 0.0 {
        return 0.0;
    }
    let d = tax.undirected_edges().len() as f64 / pairs;
    2.0 * d / (1.0 + d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tax(lines: &str) -> LabelTaxonomy {
        parse_taxonomy(lines, Path::new("t.tsv")).unwrap()
    }

    fn table(rows: &[(&str, Vec<f32>)]) -> LabelEmbedding {
        let dim = rows[0].1.len();
        let vocab = rows.iter().map(|r| r.0.to_string()).collect();
        let data = rows.iter().flat_map(|r| r.1.clone()).collect();
        LabelEmbedding {
            table: EmbeddingTable::new(vocab, dim, data).unwrap(),
        }
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parsing() {
        let t = tax("A\tB\nA\tC\n");
        assert_eq!((t.len(), t.edge_count()), (3, 2));
        let t = tax("Economic\tInternational trade\nInternational trade\tArms sales\n\
             Economic\tDefense economy\nDefense economy\tArms sales\nLonely\n");
        assert_eq!(t.len(), 5);
        assert_eq!(t.parents(t.id("Arms sales").unwrap()).len(), 2);
        let p = Path::new("t.tsv");
        assert!(matches!(parse_taxonomy("", p), Err(Error::EmptyTaxonomy)));
        assert!(matches!(
            parse_taxonomy("A\tB\tC\n", p),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_taxonomy("A\tB\n\tX\n", p),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn isolated_label_walks_stay_put() {
        let t = tax("solo\n");
        let walks = metapath_walks(
            &t,
            &WalkConfig {
                walks_per_node: 3,
                ..WalkConfig::default()
            },
        );
        assert_eq!(walks, vec![vec![0], vec![0], vec![0]]);
    }

    #[test]
    fn chain_alternates() {
        let t = tax("A\tB\n");
        let cfg = WalkConfig {
            walks_per_node: 2,
            steps: 5,
            ..WalkConfig::default()
        };
        let walks = metapath_walks(&t, &cfg);
        let (a, b) = (t.id("A").unwrap(), t.id("B").unwrap());
        assert_eq!(walks[0], vec![a, b, a, b, a, b]);
        assert_eq!(walks[2], vec![b, a, b, a, b, a]);
        assert!(walks.iter().all(|w| walk_is_valid(&t, w) && w.len() == 6));
    }

    #[test]
    fn walks_valid_on_diamond_and_default_steps() {
        assert_eq!(WalkConfig::default().steps, 500);
        let t = tax("r\ta\nr\tb\na\tx\nb\tx\nx\tr\nx\ty\n");
        let cfg = WalkConfig {
            walks_per_node: 20,
            steps: 50,
            seed: 9,
            ..WalkConfig::default()
        };
        let walks = metapath_walks(&t, &cfg);
        assert_eq!(walks.len(), 20 * t.len());
        for w in &walks {
            assert!(walk_is_valid(&t, w), "{w:?}");
        }
        assert_eq!(walks, metapath_walks(&t, &cfg));
    }

    #[test]
    fn validity_check_rejects_pass_through() {
        let t = tax("a\tb\nb\tc\n");
        let (a, b, c) = (t.id("a").unwrap(), t.id("b").unwrap(), t.id("c").unwrap());
        assert!(!walk_is_valid(&t, &[a, b, c]));
        assert!(walk_is_valid(&t, &[b, a, b]));
    }

    #[test]
    fn embedding_separates_disjoint_pairs() {
        let t = tax("p1\tc1\np2\tc2\n");
        let walk = WalkConfig {
            walks_per_node: 10,
            steps: 40,
            seed: 3,
            ..WalkConfig::default()
        };
        let sg = SkipgramConfig {
            dim: 8,
            epochs: 10,
            window: 2,
            ..SkipgramConfig::for_labels()
        };
        let e = embed_labels(&t, &walk, &sg).unwrap();
        let d = |x: &str, y: &str| 1.0 - cosine_similarity(e.vector(x).unwrap(), e.vector(y).unwrap()).unwrap();
        assert!(d("p1", "c1") < d("p1", "c2"));
        assert!(d("p2", "c2") < d("p2", "c1"));
        assert_eq!(e, embed_labels(&t, &walk, &sg).unwrap());
    }

    #[test]
    fn alpha_cases() {
        let labels: Vec<String> = ["t", "same", "orth", "anti"].iter().map(|s| s.to_string()).collect();
        let e = table(&[
            ("t", vec![1.0, 0.0]),
            ("same", vec![2.0, 0.0]),
            ("orth", vec![0.0, 1.0]),
            ("anti", vec![-1.0, 0.0]),
        ]);
        let a = alpha_weights(&e, &set(&["t"]), &labels).unwrap();
        assert!(a.alphas.get("t").is_none());
        assert!(a.alphas["same"].abs() < 1e-12);
        assert!((a.alphas["orth"] - 1.0).abs() < 1e-12);
        assert_eq!(a.alphas["anti"], 1.0);
        assert_eq!(a.dense(&labels)[0], 0.0);

        let mut with_missing = labels.clone();
        with_missing.push("ghost".into());
        let a = alpha_weights(&e, &set(&["t"]), &with_missing).unwrap();
        assert_eq!(a.alphas["ghost"], 1.0);
        assert!(alpha_weights(&e, &set(&[]), &labels).is_err());
        assert!(matches!(
            alpha_weights(&e, &set(&["nope"]), &labels),
            Err(Error::UnknownLabel(_))
        ));
    }

    fn alpha_with_total(total: f64) -> AlphaTable {
        let mut alphas = IndexMap::new();
        alphas.insert("x".to_string(), total / 2.0);
        alphas.insert("y".to_string(), total / 2.0);
        AlphaTable { alphas }
    }

    #[test]
    fn p_calibration() {
        let tables = vec![alpha_with_total(100.0); 5];
        assert!((calibrate_p(&tables).unwrap() - 0.01).abs() < 1e-15);
        assert!((calibrate_p(&[alpha_with_total(4.0)]).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            calibrate_p(&[alpha_with_total(0.0)]),
            Err(Error::ZeroAlphaMass)
        ));
        assert!(calibrate_p(&[]).is_err());
        for p in [0.001, 0.1] {
            assert_eq!(resolve_p(&[], Some(p)).unwrap(), p);
        }
        let mixed = vec![alpha_with_total(3.0), alpha_with_total(0.5), alpha_with_total(7.25)];
        let p = calibrate_p(&mixed).unwrap();
        let mean = mixed.iter().map(|t| p * t.total()).sum::<f64>() / 3.0;
        assert!((mean - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reconstruction_extremes() {
        let t = tax("a\tb\na\tc\nc\td\n");
        let e = table(&[
            ("a", vec![1.0, 0.1]),
            ("b", vec![0.9, 0.2]),
            ("c", vec![0.2, 1.0]),
            ("d", vec![-0.3, 0.8]),
        ]);
        let pts = reconstruct_eval(&e, &t, &[-1.0, 1.01]).unwrap();
        let all = pts[0];
        assert_eq!(all.recall, 1.0);
        assert!((all.precision - 3.0 / 6.0).abs() < 1e-12);
        assert_eq!(pts[1].recall, 0.0);
        assert_eq!(pts[1].micro_f1, 0.0);
        let base = random_edge_baseline(&t);
        assert!((base - 2.0 * 0.5 / 1.5).abs() < 1e-12);
        assert!((all.micro_f1 - base).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn random_taxonomies_yield_valid_walks(
            edges in proptest::collection::vec((0u8..8, 0u8..8), 0..20),
            seed in proptest::prelude::any::<u64>(),
        ) {
            let mut t = LabelTaxonomy::new();
            for i in 0..8 {
                t.add_label(&format!("l{i}"));
            }
            for (p, c) in edges {
                t.add_edge(&format!("l{p}"), &format!("l{c}"));
            }
            let cfg = WalkConfig { walks_per_node: 2, steps: 30, seed, ..WalkConfig::default() };
            for w in metapath_walks(&t, &cfg) {
                proptest::prop_assert!(w.len() <= 31);
                proptest::prop_assert!(walk_is_valid(&t, &w), "{:?}", w);
            }
        }
    }
}
