use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::json;

use graphcaps::corpus::{load_corpus, load_text_maps, write_corpus, Document, TextConfig};
use graphcaps::model::{
    self, evaluate, gradcheck_model, load_checkpoint, predict as decide, save_checkpoint, score_all, tiny_config, Dims,
    EpochLog, Model, ModelConfig, Sample, TrainConfig, TrainOptions, Variant,
};
use graphcaps::numerics::{layer_gradchecks, MarginParams};
use graphcaps::pipeline::{alpha_tables, arrange_all, assemble_all, build_samples, label_space, word_sequences};
use graphcaps::skipgram::{load_embeddings, train_skipgram_logged, EmbeddingTable, SkipgramConfig};
use graphcaps::taxonomy::{
    default_thresholds, embed_labels as embed_taxonomy, load_taxonomy, random_edge_baseline, reconstruct_eval,
    resolve_p, LabelEmbedding, WalkConfig, WalkStrategy,
};
use graphcaps::textgraph::{ArrangeConfig, DistanceMode};
use graphcaps::toy::{toy_corpus, ToyConfig};
use graphcaps::wordvec::{serialize_tensor, DocTensor};

use crate::manifest::RunManifest;
use crate::table::{f4, render};
use crate::{ArrangeArgs, Distance, Global, TextArgs};

/// Relative-error bound every gradient check must meet.
const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn out_path(g: &Global, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&g.out_dir).with_context(|| format!("creating {}", g.out_dir.display()))?;
    Ok(g.out_dir.join(name))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn text_config(a: &TextArgs) -> Result<TextConfig> {
    let (stopwords, lemmas) = load_text_maps(a.stopwords.as_deref(), a.lemmas.as_deref())?;
    let cfg = TextConfig {
        stopwords,
        lemmas,
        window: a.graph_window,
        ..TextConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn text_inputs(a: &TextArgs) -> Vec<PathBuf> {
    a.stopwords.iter().chain(&a.lemmas).cloned().collect()
}

fn arrange_config(a: &ArrangeArgs, text: &TextArgs, n: usize, t: usize, sort: bool) -> ArrangeConfig {
    ArrangeConfig {
        n,
        k: a.subgraph_size,
        t,
        window: text.graph_window,
        sort,
        distance: match a.distance {
            Distance::Unit => DistanceMode::Unit,
            Distance::InverseWeight => DistanceMode::InverseWeight,
        },
    }
}

fn tensors(
    g: &Global,
    docs: &[Document],
    text: &TextConfig,
    arrange: &ArrangeConfig,
    emb: &EmbeddingTable,
) -> Result<Vec<DocTensor>> {
    let matrices = arrange_all(docs, text, arrange, g.serial)?;
    Ok(assemble_all(&matrices, emb, g.serial)?)
}

// ---------------------------------------------------------------- toy

#[derive(Args, Debug, Serialize)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 60)]
    pub docs: usize,
    /// Share of documents with exactly one label.
    #[arg(long, default_value_t = 0.6)]
    pub single_fraction: f64,
}

pub fn toy(g: &Global, a: &ToyArgs) -> Result<()> {
    ensure!(
        (0.0..=1.0).contains(&a.single_fraction),
        "--single-fraction must lie in [0, 1]"
    );
    let toy = toy_corpus(&ToyConfig {
        documents: a.docs,
        single_fraction: a.single_fraction,
        seed: g.seed,
        ..ToyConfig::default()
    });
    let corpus = out_path(g, "corpus.jsonl")?;
    let single = out_path(g, "single.jsonl")?;
    let multi = out_path(g, "multi.jsonl")?;
    let taxonomy = out_path(g, "taxonomy.tsv")?;
    write_corpus(&corpus, &toy.docs)?;
    write_corpus(&single, &toy.single_label())?;
    write_corpus(&multi, &toy.multi_label())?;
    fs::write(&taxonomy, toy.taxonomy.to_tsv())?;
    let outputs = [corpus, single, multi, taxonomy];
    RunManifest::write(&g.out_dir, "toy", g.seed, json!(a), &[], &outputs)?;
    println!(
        "{} documents ({} single-label), {} labels, vocabulary {}",
        toy.docs.len(),
        toy.single_label().len(),
        toy.taxonomy.len(),
        toy.vocabulary().len()
    );
    Ok(())
}

// ---------------------------------------------------------------- prep

#[derive(Args, Debug, Serialize)]
pub struct PrepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Word vectors; when given, tensors are written as well.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Rows per document (central words).
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    /// Words per row.
    #[arg(long, default_value_t = 20)]
    pub row_len: usize,
    /// Keep subgraph words in traversal order instead of sorting them.
    #[arg(long)]
    pub no_sort: bool,
    #[command(flatten)]
    pub text: TextArgs,
    #[command(flatten)]
    pub arrange: ArrangeArgs,
}

fn file_stem(i: usize, id: &str) -> String {
    let clean: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{i:06}-{clean}")
}

pub fn prep(g: &Global, a: &PrepArgs) -> Result<()> {
    let docs = load_corpus(&a.corpus)?;
    let text = text_config(&a.text)?;
    let arrange = arrange_config(&a.arrange, &a.text, a.rows, a.row_len, !a.no_sort);
    let matrices = arrange_all(&docs, &text, &arrange, g.serial)?;
    let matrices_path = out_path(g, "matrices.jsonl")?;
    let mut w = BufWriter::new(File::create(&matrices_path)?);
    for m in &matrices {
        writeln!(w, "{}", m.to_json())?;
    }
    w.flush()?;
    let mut inputs = vec![a.corpus.clone()];
    inputs.extend(text_inputs(&a.text));
    let mut outputs = vec![matrices_path];
    if let Some(emb_path) = &a.embeddings {
        let emb = load_embeddings(emb_path)?;
        let dir = out_path(g, "tensors")?;
        fs::create_dir_all(&dir)?;
        let tensors = assemble_all(&matrices, &emb, g.serial)?;
        let oov: usize = tensors.iter().map(|t| t.oov).sum();
        for (i, t) in tensors.iter().enumerate() {
            serialize_tensor(t, dir.join(format!("{}.agtx", file_stem(i, &t.doc_id))))?;
        }
        info!("{} tensors, {oov} out-of-vocabulary slots", tensors.len());
        inputs.push(emb_path.clone());
        outputs.push(dir);
    }
    RunManifest::write(
        &g.out_dir,
        "prep",
        g.seed,
        json!({ "args": a, "arrange": arrange }),
        &inputs,
        &outputs,
    )?;
    println!(
        "arranged {} documents into {}x{} matrices",
        docs.len(),
        a.rows,
        a.row_len
    );
    Ok(())
}

// ---------------------------------------------------------------- word vectors

#[derive(Args, Debug, Serialize)]
pub struct EmbedWordsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Import existing vectors (text format) instead of training.
    #[arg(long)]
    pub load: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    #[command(flatten)]
    pub text: TextArgs,
}

/// Sharded skip-gram is not bit-reproducible, so it only runs when threads
/// are requested explicitly.
fn sg_threads(g: &Global) -> usize {
    if g.serial {
        0
    } else {
        g.threads.unwrap_or(0)
    }
}

pub fn embed_words(g: &Global, a: &EmbedWordsArgs) -> Result<()> {
    let docs = load_corpus(&a.corpus)?;
    let text = text_config(&a.text)?;
    let path = out_path(g, "words.vec")?;
    let mut inputs = vec![a.corpus.clone()];
    let table = match &a.load {
        Some(src) => {
            inputs.push(src.clone());
            let table = load_embeddings(src)?;
            let seqs = word_sequences(&docs, &text);
            let missing = seqs.iter().flatten().filter(|w| !table.contains(w)).count();
            info!(
                "imported {} vectors; {missing} corpus tokens are out of vocabulary",
                table.len()
            );
            table
        }
        None => {
            let cfg = SkipgramConfig {
                dim: a.dim,
                window: a.window,
                negatives: a.negatives,
                epochs: a.epochs,
                learning_rate: a.lr,
                seed: g.seed,
                min_count: a.min_count,
                threads: sg_threads(g),
            };
            let trained = train_skipgram_logged(&word_sequences(&docs, &text), &cfg)?;
            for (e, l) in trained.epoch_losses.iter().enumerate() {
                info!("skip-gram epoch {}: loss {l:.5}", e + 1);
            }
            trained.table
        }
    };
    table.save(&path)?;
    inputs.extend(text_inputs(&a.text));
    RunManifest::write(
        &g.out_dir,
        "embed-words",
        g.seed,
        json!(a),
        &inputs,
        std::slice::from_ref(&path),
    )?;
    println!(
        "{} word vectors of dimension {} → {}",
        table.len(),
        table.dim(),
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- label vectors

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
pub enum Strategy {
    Metapath,
    Uniform,
}

#[derive(Args, Debug, Serialize)]
pub struct EmbedLabelsArgs {
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub walks_per_node: usize,
    #[arg(long, default_value_t = 500)]
    pub walk_steps: usize,
    #[arg(long, default_value_t = 200)]
    pub label_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = Strategy::Metapath)]
    pub strategy: Strategy,
}

pub fn embed_labels(g: &Global, a: &EmbedLabelsArgs) -> Result<()> {
    let tax = load_taxonomy(&a.taxonomy)?;
    let walk = WalkConfig {
        walks_per_node: a.walks_per_node,
        steps: a.walk_steps,
        seed: g.seed,
        strategy: match a.strategy {
            Strategy::Metapath => WalkStrategy::MetaPath,
            Strategy::Uniform => WalkStrategy::Uniform,
        },
    };
    let sg = SkipgramConfig {
        dim: a.label_dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        seed: g.seed,
        threads: sg_threads(g),
        ..SkipgramConfig::for_labels()
    };
    let emb = embed_taxonomy(&tax, &walk, &sg)?;
    let points = reconstruct_eval(&emb, &tax, &default_thresholds())?;
    let baseline = random_edge_baseline(&tax);
    let best = points
        .iter()
        .copied()
        .fold(None::<graphcaps::taxonomy::ReconstructionPoint>, |b, p| match b {
            Some(b) if b.micro_f1 >= p.micro_f1 => Some(b),
            _ => Some(p),
        })
        .context("no reconstruction thresholds")?;
    let vec_path = out_path(g, "labels.vec")?;
    let report_path = out_path(g, "reconstruction.json")?;
    emb.table.save(&vec_path)?;
    write_json(
        &report_path,
        &json!({ "random_baseline": baseline, "best": best, "curve": points }),
    )?;
    RunManifest::write(
        &g.out_dir,
        "embed-labels",
        g.seed,
        json!(a),
        std::slice::from_ref(&a.taxonomy),
        &[vec_path, report_path],
    )?;
    print!(
        "{}",
        render(
            &[
                "labels",
                "edges",
                "best threshold",
                "micro-F1",
                "macro-F1",
                "random baseline"
            ],
            &[vec![
                tax.len().to_string(),
                tax.undirected_edges().len().to_string(),
                format!("{:.2}", best.threshold),
                f4(best.micro_f1),
                f4(best.macro_f1),
                f4(baseline),
            ]],
        )
    );
    Ok(())
}

// ---------------------------------------------------------------- training

#[derive(Args, Debug, Clone, Serialize)]
pub struct DataArgs {
    /// Training corpus (JSON Lines).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Word vectors (text format).
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Label taxonomy; fixes the label order when given.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Label vectors; required by the weighted margin loss.
    #[arg(long)]
    pub label_embeddings: Option<PathBuf>,
    /// Fixed adjustment factor instead of calibrating it on the corpus.
    #[arg(long)]
    pub p_override: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    #[arg(long, default_value_t = 20)]
    pub row_len: usize,
    #[arg(long, default_value_t = 64)]
    pub k1: usize,
    #[arg(long, default_value_t = 128)]
    pub k2: usize,
    /// Primary capsule dimension.
    #[arg(long, default_value_t = 16)]
    pub caps_dim: usize,
    /// Primary capsule channels.
    #[arg(long, default_value_t = 64)]
    pub caps_channels: usize,
    #[arg(long, default_value_t = 32)]
    pub digit_dim: usize,
    #[arg(long, default_value_t = 1024)]
    pub fc_hidden: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Primary capsule kernel width; defaults to the full row.
    #[arg(long)]
    pub primary_width: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub routing_iters: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

impl ModelArgs {
    fn config(&self, g: &Global, variant: Variant, d: usize, labels: Vec<String>) -> Result<ModelConfig> {
        let dims = Dims {
            n: self.rows,
            t: self.row_len,
            d,
            k1: self.k1,
            k2: self.k2,
            m: self.caps_dim,
            caps_channels: self.caps_channels,
            digit_dim: self.digit_dim,
            labels: labels.len(),
            stride: self.stride,
            primary_width: self.primary_width,
            fc_hidden: self.fc_hidden,
        };
        let training = TrainConfig {
            batch: self.batch,
            lr: self.lr,
            epochs: self.epochs,
            seed: g.seed,
            routing_iters: self.routing_iters,
            threshold: self.threshold,
            margin: MarginParams::default(),
        };
        let cfg = ModelConfig::new(variant, dims, training, labels);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything shared by `train` and `ablate`: loaded inputs plus tensor caches
/// for both normalization orders.
struct Workspace {
    docs: Vec<Document>,
    text: TextConfig,
    words: EmbeddingTable,
    labels: Vec<String>,
    label_emb: Option<LabelEmbedding>,
    inputs: Vec<PathBuf>,
    cache: HashMap<bool, Vec<DocTensor>>,
}

impl Workspace {
    fn load(data: &DataArgs, text_args: &TextArgs) -> Result<Self> {
        let docs = load_corpus(&data.corpus)?;
        let text = text_config(text_args)?;
        let words = load_embeddings(&data.embeddings)?;
        let tax = data.taxonomy.as_ref().map(load_taxonomy).transpose()?;
        let labels = label_space(&docs, tax.as_ref())?;
        let label_emb = match &data.label_embeddings {
            Some(p) => Some(LabelEmbedding::from_table(&load_embeddings(p)?, &labels)?),
            None => None,
        };
        let mut inputs = vec![data.corpus.clone(), data.embeddings.clone()];
        inputs.extend(data.taxonomy.iter().chain(&data.label_embeddings).cloned());
        inputs.extend(text_inputs(text_args));
        Ok(Workspace {
            docs,
            text,
            words,
            labels,
            label_emb,
            inputs,
            cache: HashMap::new(),
        })
    }

    fn samples(
        &mut self,
        g: &Global,
        arrange: &ArrangeConfig,
        weighted: bool,
        p_override: Option<f64>,
    ) -> Result<(Vec<Sample>, f64)> {
        if !self.cache.contains_key(&arrange.sort) {
            let t = tensors(g, &self.docs, &self.text, arrange, &self.words)?;
            self.cache.insert(arrange.sort, t);
        }
        let tensors = self.cache[&arrange.sort].clone();
        if !weighted {
            return Ok((build_samples(&self.docs, tensors, &self.labels, None)?, 1.0));
        }
        let emb = self.label_emb.as_ref().ok_or(graphcaps::Error::MissingLabelEmbedding)?;
        let tables = alpha_tables(&self.docs, emb, &self.labels)?;
        let p = resolve_p(&tables, p_override)?;
        Ok((build_samples(&self.docs, tensors, &self.labels, Some(&tables))?, p))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value = "HE-AGCRCNN")]
    pub variant: String,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub text: TextArgs,
    #[command(flatten)]
    pub arrange: ArrangeArgs,
}

fn run_training(
    g: &Global,
    cfg: &ModelConfig,
    samples: &[Sample],
    p: f64,
    mut log: impl FnMut(&EpochLog) -> Result<()> + Send,
) -> Result<(Model, Vec<EpochLog>)> {
    let mut model = Model::new(cfg)?;
    let opts = TrainOptions {
        p,
        serial: g.serial,
        threads: g.threads,
    };
    let name = cfg.variant().map_or("custom", |v| v.name());
    let logs = model::train(&mut model, samples, &opts, |l| {
        info!(
            "{name} epoch {:>4}: loss {:.6}  micro-F1 {:.4}  macro-F1 {:.4}",
            l.epoch, l.loss, l.micro_f1, l.macro_f1
        );
        log(l).map_err(|e| graphcaps::Error::Config(format!("{e:#}")))
    })?;
    Ok((model, logs))
}

pub fn train(g: &Global, a: &TrainArgs) -> Result<()> {
    let variant: Variant = a.variant.parse()?;
    let mut ws = Workspace::load(&a.data, &a.text)?;
    let flags = variant.flags();
    let arrange = arrange_config(&a.arrange, &a.text, a.model.rows, a.model.row_len, flags.sorting);
    let (samples, p) = ws.samples(g, &arrange, flags.weighted_margin_loss, a.data.p_override)?;
    let cfg = a.model.config(g, variant, ws.words.dim(), ws.labels.clone())?;

    let log_path = out_path(g, "train_log.jsonl")?;
    let mut log = BufWriter::new(File::create(&log_path)?);
    let (model, logs) = run_training(g, &cfg, &samples, p, |l| {
        writeln!(log, "{}", serde_json::to_string(l)?)?;
        Ok(log.flush()?)
    })?;
    drop(log);
    let ckpt = out_path(g, "model.agcr")?;
    save_checkpoint(&model, &ckpt)?;
    RunManifest::write(
        &g.out_dir,
        "train",
        g.seed,
        json!({ "args": a, "model": cfg, "arrange": arrange, "p": p }),
        &ws.inputs,
        std::slice::from_ref(&ckpt),
    )?;
    let last = logs.last().context("no epochs were run")?;
    println!(
        "{variant}: {} epochs, loss {:.6} → {:.6}, training micro-F1 {:.4}, macro-F1 {:.4} → {}",
        logs.len(),
        logs[0].loss,
        last.loss,
        last.micro_f1,
        last.macro_f1,
        ckpt.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- eval / predict / attention

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Word vectors used at training time.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Decision threshold; defaults to the checkpoint's.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub text: TextArgs,
    #[command(flatten)]
    pub arrange: ArrangeArgs,
}

struct Loaded {
    model: Model,
    docs: Vec<Document>,
    tensors: Vec<DocTensor>,
    inputs: Vec<PathBuf>,
}

fn load_for_inference(g: &Global, a: &EvalArgs) -> Result<Loaded> {
    let model = load_checkpoint(&a.model)?;
    let cfg = model.config().clone();
    let docs = load_corpus(&a.corpus)?;
    let text = text_config(&a.text)?;
    let words = load_embeddings(&a.embeddings)?;
    ensure!(
        words.dim() == cfg.dims.d,
        "word vectors have dimension {}, the model expects {}",
        words.dim(),
        cfg.dims.d
    );
    let arrange = arrange_config(&a.arrange, &a.text, cfg.dims.n, cfg.dims.t, cfg.flags.sorting);
    let tensors = tensors(g, &docs, &text, &arrange, &words)?;
    let mut inputs = vec![a.model.clone(), a.corpus.clone(), a.embeddings.clone()];
    inputs.extend(text_inputs(&a.text));
    Ok(Loaded {
        model,
        docs,
        tensors,
        inputs,
    })
}

fn threshold(a: &EvalArgs, cfg: &ModelConfig) -> Result<f64> {
    let t = a.threshold.unwrap_or(cfg.training.threshold);
    ensure!(t > 0.0 && t < 1.0, "threshold must lie in (0, 1), got {t}");
    Ok(t)
}

pub fn eval(g: &Global, a: &EvalArgs) -> Result<()> {
    let l = load_for_inference(g, a)?;
    let cfg = l.model.config();
    let thr = threshold(a, cfg)?;
    let samples = build_samples(&l.docs, l.tensors, &cfg.label_names, None)?;
    let report = evaluate(&l.model.net, &samples, thr, g.serial)?;
    let path = out_path(g, "metrics.json")?;
    write_json(&path, &report)?;
    RunManifest::write(&g.out_dir, "eval", g.seed, json!(a), &l.inputs, &[path])?;
    let mut rows: Vec<Vec<String>> = report
        .per_label
        .iter()
        .map(|m| {
            vec![
                m.label.clone(),
                m.tp.to_string(),
                m.fp.to_string(),
                m.fn_.to_string(),
                f4(m.f1),
            ]
        })
        .collect();
    rows.push(vec![
        "micro".into(),
        String::new(),
        String::new(),
        String::new(),
        f4(report.micro_f1),
    ]);
    rows.push(vec![
        "macro".into(),
        String::new(),
        String::new(),
        String::new(),
        f4(report.macro_f1),
    ]);
    print!("{}", render(&["label", "tp", "fp", "fn", "f1"], &rows));
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    id: &'a str,
    labels: Vec<&'a str>,
    scores: BTreeMap<&'a str, f32>,
}

pub fn predict(g: &Global, a: &EvalArgs) -> Result<()> {
    let l = load_for_inference(g, a)?;
    let cfg = l.model.config();
    let thr = threshold(a, cfg)?;
    let refs: Vec<&DocTensor> = l.tensors.iter().collect();
    let scores = score_all(&l.model.net, &refs, g.serial)?;
    let path = out_path(g, "predictions.jsonl")?;
    let mut w = BufWriter::new(File::create(&path)?);
    for (doc, s) in l.docs.iter().zip(&scores) {
        let names = &cfg.label_names;
        let p = Prediction {
            id: &doc.id,
            labels: decide(s, thr).into_iter().map(|k| names[k].as_str()).collect(),
            scores: names.iter().map(String::as_str).zip(s.iter().copied()).collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&p)?)?;
    }
    w.flush()?;
    RunManifest::write(
        &g.out_dir,
        "predict",
        g.seed,
        json!(a),
        &l.inputs,
        std::slice::from_ref(&path),
    )?;
    println!("{} predictions → {}", l.docs.len(), path.display());
    Ok(())
}

pub fn attn_dump(g: &Global, a: &EvalArgs) -> Result<()> {
    let l = load_for_inference(g, a)?;
    let refs: Vec<&DocTensor> = l.tensors.iter().collect();
    let attn = out_path(g, "attention.csv")?;
    let lengths = out_path(g, "lengths.csv")?;
    model::export_attention(&l.model.net, &refs, &attn, &lengths, g.serial)?;
    RunManifest::write(
        &g.out_dir,
        "attn-dump",
        g.seed,
        json!(a),
        &l.inputs,
        &[attn.clone(), lengths.clone()],
    )?;
    println!(
        "attention → {}, capsule lengths → {}",
        attn.display(),
        lengths.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- ablation

#[derive(Args, Debug, Serialize)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub text: TextArgs,
    #[command(flatten)]
    pub arrange: ArrangeArgs,
}

#[derive(Debug, Serialize)]
struct AblationRow {
    variant: String,
    flags: graphcaps::model::Flags,
    /// Flags that differ from the full model.
    differs_from_full: Vec<&'static str>,
    p: f64,
    first_loss: f64,
    final_loss: f64,
    loss_reduction: f64,
    train_micro_f1: f64,
    train_macro_f1: f64,
    epochs: Vec<EpochLog>,
}

pub fn ablate(g: &Global, a: &AblateArgs) -> Result<()> {
    let mut ws = Workspace::load(&a.data, &a.text)?;
    let full = Variant::HeAgcrcnn.flags();
    let mut rows = Vec::new();
    for variant in Variant::ALL {
        let flags = variant.flags();
        let arrange = arrange_config(&a.arrange, &a.text, a.model.rows, a.model.row_len, flags.sorting);
        let (samples, p) = ws.samples(g, &arrange, flags.weighted_margin_loss, a.data.p_override)?;
        let cfg = a.model.config(g, variant, ws.words.dim(), ws.labels.clone())?;
        let (model, logs) = run_training(g, &cfg, &samples, p, |_| Ok(()))?;
        let (first, last) = (logs.first().context("no epochs")?, logs.last().context("no epochs")?);
        let report = evaluate(&model.net, &samples, cfg.training.threshold, g.serial)?;
        rows.push(AblationRow {
            variant: variant.name().to_string(),
            flags,
            differs_from_full: flags.diff(&full),
            p,
            first_loss: first.loss,
            final_loss: last.loss,
            loss_reduction: 1.0 - last.loss / first.loss,
            train_micro_f1: report.micro_f1,
            train_macro_f1: report.macro_f1,
            epochs: logs,
        });
    }
    let tick = |b: bool| if b { "x" } else { "" }.to_string();
    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.variant.clone(),
                tick(r.flags.cnn),
                tick(r.flags.sorting),
                tick(r.flags.lstm),
                tick(r.flags.attentional_lstm),
                tick(r.flags.capsule),
                tick(r.flags.weighted_margin_loss),
                format!("{:.4}", r.first_loss),
                format!("{:.4}", r.final_loss),
                format!("{:.1}%", 100.0 * r.loss_reduction),
                f4(r.train_micro_f1),
                f4(r.train_macro_f1),
            ]
        })
        .collect();
    let table = render(
        &[
            "variant",
            "cnn",
            "sort",
            "lstm",
            "attn",
            "caps",
            "he",
            "loss@1",
            "loss@end",
            "reduction",
            "micro-F1",
            "macro-F1",
        ],
        &table_rows,
    );
    let json_path = out_path(g, "ablation.json")?;
    let txt_path = out_path(g, "ablation.txt")?;
    write_json(&json_path, &json!({ "variants": rows }))?;
    fs::write(&txt_path, &table)?;
    RunManifest::write(
        &g.out_dir,
        "ablate",
        g.seed,
        json!(a),
        &ws.inputs,
        &[json_path, txt_path],
    )?;
    print!("{table}");
    Ok(())
}

// ---------------------------------------------------------------- gradient check

#[derive(Args, Debug, Serialize)]
pub struct GradcheckArgs {
    /// Check a single variant instead of the whole grid.
    #[arg(long)]
    pub variant: Option<String>,
}

pub fn gradcheck(g: &Global, a: &GradcheckArgs) -> Result<()> {
    let variants = match &a.variant {
        Some(v) => vec![v.parse::<Variant>()?],
        None => Variant::ALL.to_vec(),
    };
    let mut rows = Vec::new();
    let mut report = Vec::new();
    let mut worst_overall: f64 = 0.0;
    for (name, err) in layer_gradchecks(g.seed)? {
        worst_overall = worst_overall.max(err);
        rows.push(vec![format!("layer {name}"), String::new(), format!("{err:.3e}")]);
        report.push(json!({ "check": format!("layer {name}"), "max_relative_error": err }));
    }
    for v in variants {
        let r = gradcheck_model(&tiny_config(v), g.seed)?;
        let (group, err) = r
            .groups
            .iter()
            .cloned()
            .fold((String::new(), 0.0), |acc, (n, e)| if e > acc.1 { (n, e) } else { acc });
        worst_overall = worst_overall.max(err);
        rows.push(vec![format!("model {v}"), group, format!("{err:.3e}")]);
        report.push(json!({ "check": format!("model {v}"), "groups": r.groups, "max_relative_error": err }));
    }
    let path = out_path(g, "gradcheck.json")?;
    write_json(
        &path,
        &json!({ "tolerance": GRADCHECK_TOLERANCE, "max_relative_error": worst_overall, "checks": report }),
    )?;
    print!("{}", render(&["check", "worst group", "max rel. error"], &rows));
    println!("max relative error {worst_overall:.3e} (tolerance {GRADCHECK_TOLERANCE:e})");
    if worst_overall >= GRADCHECK_TOLERANCE {
        bail!("gradient check failed");
    }
    Ok(())
}
