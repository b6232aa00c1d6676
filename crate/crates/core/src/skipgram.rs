//! Skip-gram with negative sampling over arbitrary token sequences.
//!
//! Used twice: for word vectors trained on the corpus itself, and for label
//! vectors trained on meta-path walks over the taxonomy.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipgramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub min_count: usize,
    /// Worker count for sharded training; 0 or 1 trains serially.
    #[serde(default)]
    pub threads: usize,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        Self::for_words()
    }
}

impl SkipgramConfig {
    pub fn for_words() -> Self {
        SkipgramConfig {
            dim: 50,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
            min_count: 1,
            threads: 0,
        }
    }

    pub fn for_labels() -> Self {
        SkipgramConfig {
            dim: 200,
            ..Self::for_words()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 {
            return Err(Error::Config("dim, window and negatives must be >= 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
}

/// Dense vectors keyed by token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vectors: Vec<f32>,
    pub meta: EmbeddingMeta,
}

impl EmbeddingTable {
    pub fn new(vocab: Vec<String>, dim: usize, vectors: Vec<f32>) -> Result<Self> {
        if vectors.len() != vocab.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: vocab.len() * dim,
                actual: vectors.len(),
            });
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, tok) in vocab.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate token `{tok}` in embedding table")));
            }
        }
        Ok(EmbeddingTable {
            vocab,
            index,
            dim,
            vectors,
            meta: EmbeddingMeta::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vocab.len(), self.dim);
        for (i, tok) in self.vocab.iter().enumerate() {
            out.push_str(&escape_token(tok));
            for v in self.row(i) {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

// Tokens may contain spaces (label names do), so they are escaped on disk.
fn escape_token(tok: &str) -> String {
    let mut s = String::with_capacity(tok.len());
    for ch in tok.chars() {
        match ch {
            '\\' => s.push_str("\\\\"),
            ' ' => s.push_str("\\s"),
            '\t' => s.push_str("\\t"),
            '\n' => s.push_str("\\n"),
            c => s.push(c),
        }
    }
    s
}

fn unescape_token(tok: &str) -> String {
    let mut s = String::with_capacity(tok.len());
    let mut chars = tok.chars();
    while let Some(ch) = chars.next() {
        if ch == '\\' {
            match chars.next() {
                Some('s') => s.push(' '),
                Some('t') => s.push('\t'),
                Some('n') => s.push('\n'),
                Some(c) => s.push(c),
                None => s.push('\\'),
            }
        } else {
            s.push(ch);
        }
    }
    s
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, path)
}

/// Parse the text format: a `vocab_size dim` header, then one
/// `token v1 ... vD` row per entry.
pub fn parse_embeddings(text: &str, path: &Path) -> Result<EmbeddingTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing `vocab_size dim` header"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| s.parse::<usize>().ok();
    let (count, dim) = match head.as_slice() {
        [c, d] => match (parse_usize(c), parse_usize(d)) {
            (Some(c), Some(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(path, 1, "header must be two positive integers")),
        },
        _ => return Err(Error::parse(path, 1, "header must be `vocab_size dim`")),
    };
    let mut vocab = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count * dim);
    for (i, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim + 1 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected token plus {dim} values, found {} fields", fields.len()),
            ));
        }
        vocab.push(unescape_token(fields[0]));
        for f in &fields[1..] {
            let v: f32 = f
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad number `{f}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, i + 1, "non-finite value"));
            }
            vectors.push(v);
        }
    }
    if vocab.len() != count {
        return Err(Error::parse(
            path,
            1,
            format!("header announces {count} rows, found {}", vocab.len()),
        ));
    }
    EmbeddingTable::new(vocab, dim, vectors)
}

/// `1 - cos(u, v)`. A zero vector is maximally uninformative and yields 1.
pub fn cosine_distance(u: &[f32], v: &[f32]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(u, v)?)
}

pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        log::warn!("cosine with a zero vector; similarity taken as 0");
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

// Sorted by descending count, then lexicographically.
fn build_vocab<S: AsRef<str>>(sequences: &[Vec<S>], min_count: usize) -> Vocab {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for seq in sequences {
        for tok in seq {
            *counts.entry(tok.as_ref()).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c as usize >= min_count.max(1))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let words: Vec<String> = entries.iter().map(|(w, _)| w.to_string()).collect();
    let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    Vocab {
        counts: entries.iter().map(|e| e.1).collect(),
        words,
        index,
    }
}

/// Unigram counts raised to 3/4, sampled by inverse CDF.
struct NoiseTable {
    cdf: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let raw: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable {
            cdf: raw.into_iter().map(|c| c / acc).collect(),
        }
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

#[derive(Clone)]
struct Weights {
    dim: usize,
    input: Vec<f32>,
    output: Vec<f32>,
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Weights {
    fn init(n: usize, dim: usize, rng: &mut Rng) -> Self {
        let input = (0..n * dim).map(|_| (rng.gen::<f32>() - 0.5) / dim as f32).collect();
        Weights {
            dim,
            input,
            output: vec![0.0; n * dim],
        }
    }

    fn dot(&self, center: usize, target: usize) -> f32 {
        let d = self.dim;
        self.input[center * d..(center + 1) * d]
            .iter()
            .zip(&self.output[target * d..(target + 1) * d])
            .map(|(a, b)| a * b)
            .sum()
    }

    fn update(&mut self, center: usize, context: usize, negatives: &[usize], lr: f32, grad: &mut [f32]) {
        let d = self.dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let targets = std::iter::once((context, 1.0f32)).chain(negatives.iter().map(|&n| (n, 0.0)));
        for (t, label) in targets {
            let g = (label - sigmoid(self.dot(center, t))) * lr;
            let inp = &self.input[center * d..(center + 1) * d];
            let out = &mut self.output[t * d..(t + 1) * d];
            for k in 0..d {
                grad[k] += g * out[k];
                out[k] += g * inp[k];
            }
        }
        for (v, g) in self.input[center * d..(center + 1) * d].iter_mut().zip(grad.iter()) {
            *v += g;
        }
    }

    fn pair_loss(&self, center: usize, context: usize, negatives: &[usize]) -> f64 {
        let pos = sigmoid(self.dot(center, context)).max(1e-7) as f64;
        let mut loss = -pos.ln();
        for &n in negatives {
            loss -= (sigmoid(-self.dot(center, n)).max(1e-7) as f64).ln();
        }
        loss
    }
}

struct Pass<'a> {
    seqs: &'a [Vec<usize>],
    noise: &'a NoiseTable,
    cfg: &'a SkipgramConfig,
    total_tokens: f64,
}

impl Pass<'_> {
    fn draw_negatives(&self, rng: &mut Rng, context: usize, out: &mut Vec<usize>) {
        out.clear();
        // bounded so a one-word vocabulary cannot spin forever
        let mut tries = 0;
        while out.len() < self.cfg.negatives && tries < self.cfg.negatives * 10 {
            let n = self.noise.sample(rng);
            tries += 1;
            if n != context {
                out.push(n);
            }
        }
    }

    /// One sweep over `seqs`; the learning rate decays linearly with the
    /// global token count, starting from `processed`.
    fn run(&self, w: &mut Weights, rng: &mut Rng, mut processed: f64) {
        let lr0 = self.cfg.learning_rate as f32;
        let mut grad = vec![0.0f32; w.dim];
        let mut negs = Vec::with_capacity(self.cfg.negatives);
        for seq in self.seqs {
            for (i, &center) in seq.iter().enumerate() {
                let frac = 1.0 - processed / self.total_tokens;
                let lr = lr0 * (frac as f32).max(1e-4);
                processed += 1.0;
                let lo = i.saturating_sub(self.cfg.window);
                let hi = (i + self.cfg.window + 1).min(seq.len());
                for (j, &context) in seq.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    self.draw_negatives(rng, context, &mut negs);
                    w.update(center, context, &negs, lr, &mut grad);
                }
            }
        }
    }
}

/// Trained table plus the monitored loss after every epoch.
#[derive(Debug, Clone)]
pub struct TrainedEmbedding {
    pub table: EmbeddingTable,
    pub epoch_losses: Vec<f64>,
}

pub fn train_skipgram<S: AsRef<str>>(sequences: &[Vec<S>], cfg: &SkipgramConfig) -> Result<EmbeddingTable> {
    Ok(train_skipgram_logged(sequences, cfg)?.table)
}

pub fn train_skipgram_logged<S: AsRef<str>>(sequences: &[Vec<S>], cfg: &SkipgramConfig) -> Result<TrainedEmbedding> {
    cfg.validate()?;
    let vocab = build_vocab(sequences, cfg.min_count);
    if vocab.words.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let seqs: Vec<Vec<usize>> = sequences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.index.get(t.as_ref()).copied()).collect())
        .collect();
    let noise = NoiseTable::new(&vocab.counts);
    let tokens_per_epoch: usize = seqs.iter().map(Vec::len).sum();
    let pass = Pass {
        seqs: &seqs,
        noise: &noise,
        cfg,
        total_tokens: (tokens_per_epoch * cfg.epochs).max(1) as f64,
    };

    let mut init_rng = rng(derive_seed(cfg.seed, &[0]));
    let mut w = Weights::init(vocab.words.len(), cfg.dim, &mut init_rng);
    let monitor = monitor_sample(&pass, derive_seed(cfg.seed, &[1]));
    let mut train_rng = rng(derive_seed(cfg.seed, &[2]));
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let processed = (epoch * tokens_per_epoch) as f64;
        if cfg.threads > 1 {
            train_sharded(&pass, &mut w, epoch, processed);
        } else {
            pass.run(&mut w, &mut train_rng, processed);
        }
        let loss = monitor.iter().map(|(c, o, n)| w.pair_loss(*c, *o, n)).sum::<f64>() / monitor.len().max(1) as f64;
        losses.push(loss);
    }

    let mut table = EmbeddingTable::new(vocab.words, cfg.dim, w.input)?;
    table.meta = EmbeddingMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        window: cfg.window,
        negatives: cfg.negatives,
    };
    Ok(TrainedEmbedding {
        table,
        epoch_losses: losses,
    })
}

/// Fixed (center, context, negatives) triples for loss monitoring.
fn monitor_sample(pass: &Pass<'_>, seed: u64) -> Vec<(usize, usize, Vec<usize>)> {
    const MAX: usize = 2000;
    let mut r = rng(seed);
    let mut out = Vec::new();
    'outer: for seq in pass.seqs {
        for i in 0..seq.len() {
            let hi = (i + pass.cfg.window + 1).min(seq.len());
            for j in i.saturating_sub(pass.cfg.window)..hi {
                if j == i {
                    continue;
                }
                let mut negs = Vec::new();
                pass.draw_negatives(&mut r, seq[j], &mut negs);
                out.push((seq[i], seq[j], negs));
                if out.len() >= MAX {
                    break 'outer;
                }
            }
        }
    }
    out
}

/// Each worker trains a private copy on its shard; deltas are summed back
/// in shard order.
fn train_sharded(pass: &Pass<'_>, w: &mut Weights, epoch: usize, processed: f64) {
    let chunk = pass.seqs.len().div_ceil(pass.cfg.threads).max(1);
    let base = w.clone();
    let results: Vec<Weights> = pass
        .seqs
        .par_chunks(chunk)
        .enumerate()
        .map(|(s, seqs)| {
            let mut local = base.clone();
            let mut r = rng(derive_seed(pass.cfg.seed, &[3, epoch as u64, s as u64]));
            let sub = Pass { seqs, ..*pass };
            sub.run(&mut local, &mut r, processed);
            local
        })
        .collect();
    for local in results {
        for (dst, (new, old)) in w.input.iter_mut().zip(local.input.iter().zip(&base.input)) {
            *dst += new - old;
        }
        for (dst, (new, old)) in w.output.iter_mut().zip(local.output.iter().zip(&base.output)) {
            *dst += new - old;
        }
    }
}
