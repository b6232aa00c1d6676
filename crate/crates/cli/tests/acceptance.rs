//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails that is not listed in
//! `KNOWN_UNMET`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use rand::Rng as _;
use serde_json::Value;

use graphcaps::corpus::{load_corpus, tokenize, TextConfig, Token, TokenStream};
use graphcaps::model::{gradcheck_model, tiny_config, Variant};
use graphcaps::numerics::{
    dynamic_routing, layer_gradchecks, margin_loss, squash, MarginParams, DEFAULT_ROUTING_ITERATIONS,
};
use graphcaps::rng::rng;
use graphcaps::skipgram::{EmbeddingTable, SkipgramConfig};
use graphcaps::taxonomy::{
    alpha_weights, default_thresholds, embed_labels, metapath_walks, random_edge_baseline, reconstruct_eval,
    walk_is_valid, LabelEmbedding, WalkConfig,
};
use graphcaps::textgraph::{arrange_matrix, build_graph, closeness_scores, ArrangeConfig, DistanceMode};
use graphcaps::toy::synthetic_taxonomy;

/// Criteria that do not hold with this implementation; the reasons are
/// documented in the README. They still run and print FAIL.
const KNOWN_UNMET: &[u32] = &[6];

const GRADCHECK_TOLERANCE: f64 = 1e-4;
const COUPLING_TOLERANCE: f64 = 1e-6;
const CLOSENESS_TOLERANCE: f64 = 1e-9;
const OVERFIT_TARGET: f64 = 0.95;
const LOSS_REDUCTION_TARGET: f64 = 0.5;

/// Reduced dims shared by the toy-scale training criteria.
const TOY_DIMS: &[&str] = &[
    "--rows",
    "16",
    "--row-len",
    "12",
    "--k1",
    "16",
    "--k2",
    "32",
    "--caps-dim",
    "8",
    "--caps-channels",
    "8",
    "--digit-dim",
    "8",
    "--fc-hidden",
    "64",
    "--batch",
    "8",
];
const WORD_DIM: &str = "16";

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_graphcaps"));
    c.env("RUST_LOG", "warn");
    c
}

/// Run the CLI in serial mode with `dir` as output directory.
fn cli(dir: &Path, args: &[&str]) -> Result<String> {
    let out = bin()
        .args(["--serial", "--out-dir"])
        .arg(dir)
        .args(args)
        .output()
        .context("spawning the CLI")?;
    if !out.status.success() {
        bail!(
            "`graphcaps {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    Ok(String::from_utf8(out.stdout)?)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn read_json(p: &Path) -> Result<Value> {
    Ok(serde_json::from_str(
        &fs::read_to_string(p).with_context(|| p.display().to_string())?,
    )?)
}

fn read_jsonl(p: &Path) -> Result<Vec<Value>> {
    fs::read_to_string(p)?
        .lines()
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Toy corpus plus word and label vectors, prepared once.
struct ToyData {
    dir: PathBuf,
}

impl ToyData {
    fn prepare(dir: PathBuf) -> Result<Self> {
        cli(&dir, &["toy"])?;
        let corpus = dir.join("corpus.jsonl");
        cli(
            &dir,
            &[
                "embed-words",
                "--corpus",
                s(&corpus),
                "--dim",
                WORD_DIM,
                "--epochs",
                "10",
            ],
        )?;
        cli(&dir, &["embed-labels", "--taxonomy", s(&dir.join("taxonomy.tsv"))])?;
        Ok(ToyData { dir })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn data_args(&self, corpus: &str) -> Vec<String> {
        vec![
            "--corpus".into(),
            s(&self.path(corpus)).into(),
            "--embeddings".into(),
            s(&self.path("words.vec")).into(),
            "--taxonomy".into(),
            s(&self.path("taxonomy.tsv")).into(),
            "--label-embeddings".into(),
            s(&self.path("labels.vec")).into(),
        ]
    }

    fn eval_args(&self, model: &Path, corpus: &str) -> Vec<String> {
        vec![
            "--model".into(),
            s(model).into(),
            "--corpus".into(),
            s(&self.path(corpus)).into(),
            "--embeddings".into(),
            s(&self.path("words.vec")).into(),
        ]
    }
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

// ------------------------------------------------------------------ 1

fn numerics_invariants() -> Result<Outcome> {
    let mut r = rng(101);
    let mut worst_norm: f64 = 0.0;
    let mut worst_cos: f64 = 1.0;
    for _ in 0..10_000 {
        let dim = r.gen_range(1..=16);
        let scale = 10f64.powf(r.gen_range(-3.0..1.5));
        let v: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0) * scale).collect();
        let out = squash(&v);
        let n_in = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let n_out = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst_norm = worst_norm.max(n_out);
        if n_in > 0.0 && n_out > 0.0 {
            let cos = v.iter().zip(&out).map(|(a, b)| a * b).sum::<f64>() / (n_in * n_out);
            worst_cos = worst_cos.min(cos);
        }
    }
    let mut worst_sum: f64 = 0.0;
    for _ in 0..1_000 {
        let (inc, outc, dim) = (r.gen_range(1..=12), r.gen_range(1..=8), r.gen_range(1..=8));
        let u_hat: Vec<f64> = (0..inc * outc * dim).map(|_| r.gen_range(-2.0..2.0)).collect();
        let iters = r.gen_range(1..=DEFAULT_ROUTING_ITERATIONS + 2);
        let trace = dynamic_routing(&u_hat, inc, outc, dim, iters)?;
        for c in &trace.c {
            for row in c.chunks(outc) {
                worst_sum = worst_sum.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    let mp = MarginParams::default();
    let mut min_loss = f64::INFINITY;
    let mut worst_linear: f64 = 0.0;
    for _ in 0..1_000 {
        let k = r.gen_range(1..=10);
        let lengths: Vec<f64> = (0..k).map(|_| r.gen_range(0.0..1.0)).collect();
        let targets: Vec<bool> = (0..k).map(|_| r.gen_bool(0.3)).collect();
        let a1: Vec<f64> = (0..k).map(|_| r.gen_range(0.0..1.0)).collect();
        let a2: Vec<f64> = (0..k).map(|_| r.gen_range(0.0..1.0)).collect();
        let (c1, c2) = (r.gen_range(0.0..3.0), r.gen_range(0.0..3.0));
        let p = r.gen_range(0.1..5.0);
        let zero = vec![0.0; k];
        let mix: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| c1 * x + c2 * y).collect();
        let l = |a: &[f64]| margin_loss(&lengths, &targets, a, p, &mp);
        min_loss = min_loss.min(l(&a1)).min(l(&mix));
        // affine in alpha: L(c1 a1 + c2 a2) - L(0) = c1 (L(a1) - L(0)) + c2 (L(a2) - L(0))
        let lhs = l(&mix) - l(&zero);
        let rhs = c1 * (l(&a1) - l(&zero)) + c2 * (l(&a2) - l(&zero));
        worst_linear = worst_linear.max((lhs - rhs).abs());
    }
    outcome(
        worst_norm < 1.0
            && worst_cos > 1.0 - 1e-12
            && worst_sum < COUPLING_TOLERANCE
            && min_loss >= 0.0
            && worst_linear < 1e-12,
        format!(
            "max squash norm {worst_norm:.6}, min cosine {worst_cos:.15}, max |sum c - 1| {worst_sum:.1e}, \
             min loss {min_loss:.3e}, alpha-linearity residual {worst_linear:.1e}"
        ),
    )
}

// ------------------------------------------------------------------ 2

fn gradient_checks() -> Result<Outcome> {
    let mut worst = (String::new(), 0.0f64);
    for seed in 0..2 {
        for (name, err) in layer_gradchecks(seed)? {
            if err > worst.1 {
                worst = (name, err);
            }
        }
    }
    for v in Variant::ALL {
        let report = gradcheck_model(&tiny_config(v), 3)?;
        for (group, err) in report.groups {
            if err > worst.1 {
                worst = (format!("{v}/{group}"), err);
            }
        }
    }
    outcome(
        worst.1 < GRADCHECK_TOLERANCE,
        format!("max relative error {:.3e} ({})", worst.1, worst.0),
    )
}

// ------------------------------------------------------------------ 3

fn brute_force_pairs(stream: &TokenStream, window: usize) -> BTreeMap<(String, String), u32> {
    let toks = &stream.tokens;
    let mut counts = BTreeMap::new();
    for i in 0..toks.len() {
        for j in 0..toks.len() {
            if j > i && j - i < window && toks[i].lemma != toks[j].lemma {
                *counts
                    .entry((toks[i].lemma.clone(), toks[j].lemma.clone()))
                    .or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Closeness from plain BFS over the undirected pair set, with the
/// reachable-fraction correction for disconnected graphs.
fn bfs_closeness(lemmas: &[String], pairs: &BTreeMap<(String, String), u32>) -> HashMap<String, f64> {
    let n = lemmas.len();
    let id: HashMap<&str, usize> = lemmas.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut adj = vec![BTreeSet::new(); n];
    for (a, b) in pairs.keys() {
        adj[id[a.as_str()]].insert(id[b.as_str()]);
        adj[id[b.as_str()]].insert(id[a.as_str()]);
    }
    let mut out = HashMap::new();
    for v in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[v] = 0;
        let mut q = VecDeque::from([v]);
        while let Some(u) = q.pop_front() {
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
            }
        }
        let reached: Vec<usize> = dist.iter().copied().filter(|&d| d != usize::MAX).collect();
        let total: usize = reached.iter().sum();
        let score = if n <= 1 || total == 0 {
            0.0
        } else {
            let r1 = (reached.len() - 1) as f64;
            (r1 / total as f64) * (r1 / (n - 1) as f64)
        };
        out.insert(lemmas[v].clone(), score);
    }
    out
}

fn graph_oracles() -> Result<Outcome> {
    let mut r = rng(303);
    let mut worst: f64 = 0.0;
    for doc in 0..200 {
        let len = r.gen_range(1..=80);
        let vocab = r.gen_range(2..=30);
        let window = r.gen_range(2..=5);
        let mut pos = 0;
        let tokens: Vec<Token> = (0..len)
            .map(|_| {
                pos += r.gen_range(1..=3);
                let lemma = format!("v{}", r.gen_range(0..vocab));
                Token {
                    surface: lemma.clone(),
                    lemma,
                    position: pos,
                }
            })
            .collect();
        let stream = TokenStream { tokens };
        let g = build_graph(&stream, window);
        let pairs = brute_force_pairs(&stream, window);
        let edges: BTreeMap<(String, String), u32> = g
            .edges()
            .map(|(a, b, w)| ((g.nodes()[a].lemma.clone(), g.nodes()[b].lemma.clone()), w))
            .collect();
        ensure!(edges == pairs, "document {doc}: edge counts differ from brute force");
        let lemmas: Vec<String> = g.nodes().iter().map(|n| n.lemma.clone()).collect();
        let oracle = bfs_closeness(&lemmas, &pairs);
        for (node, score) in g.nodes().iter().zip(closeness_scores(&g, DistanceMode::Unit)) {
            worst = worst.max((score - oracle[&node.lemma]).abs());
        }
    }
    outcome(
        worst < CLOSENESS_TOLERANCE,
        format!("edge counts exact; max closeness deviation {worst:.1e}"),
    )
}

// ------------------------------------------------------------------ 4

const GOLDEN_TEXT: &str = "Electric car company plans purchase million common of the and to company expects";
const GOLDEN_ROW: &str = r#"{"doc_id":"worked-example","N":1,"T":12,"rows":[{"slots":[["electric",1,1],["car",2,1],["company",3,1],["plan",4,1],["purchase",5,1],["million",6,1],["common",7,1],["company",12,2],["expect",13,2],[null,0,0],[null,0,0],[null,0,0]],"q":2}]}"#;

fn golden_row() -> Result<Outcome> {
    let cfg = TextConfig {
        stopwords: ["of", "the", "and", "to"].iter().map(|w| w.to_string()).collect(),
        lemmas: [("plans", "plan"), ("expects", "expect")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        ..TextConfig::default()
    };
    let arrange = ArrangeConfig {
        n: 1,
        t: 12,
        ..ArrangeConfig::default()
    };
    let render = || -> Result<String> {
        Ok(arrange_matrix("worked-example", &tokenize(GOLDEN_TEXT, &cfg), &arrange)?.to_json())
    };
    let (a, b) = (render()?, render()?);
    let pass = a == GOLDEN_ROW && a == b;
    let detail = if pass {
        "row bytes match the pinned golden output".to_string()
    } else {
        format!("got {a}")
    };
    outcome(pass, detail)
}

// ------------------------------------------------------------------ 5

fn taxonomy_embedding() -> Result<Outcome> {
    let seeds = 1..=5u64;
    let (mut best_sum, mut base_sum, mut walks, mut labels) = (0.0, 0.0, 0usize, 0usize);
    for seed in seeds.clone() {
        let tax = synthetic_taxonomy(3, 3, 2, seed);
        labels = tax.len();
        let walk = WalkConfig {
            seed,
            ..WalkConfig::default()
        };
        for w in metapath_walks(&tax, &walk) {
            ensure!(walk_is_valid(&tax, &w), "seed {seed}: invalid walk {w:?}");
            walks += 1;
        }
        let emb = embed_labels(
            &tax,
            &walk,
            &SkipgramConfig {
                seed,
                ..SkipgramConfig::for_labels()
            },
        )?;
        let best = reconstruct_eval(&emb, &tax, &default_thresholds())?
            .iter()
            .map(|p| p.micro_f1)
            .fold(0.0, f64::max);
        best_sum += best;
        base_sum += random_edge_baseline(&tax);
    }
    let n = seeds.count() as f64;
    let (best, base) = (best_sum / n, base_sum / n);
    outcome(
        labels == 40 && best >= 2.0 * base,
        format!(
            "{walks} walks valid on {labels} labels; mean best micro-F1 {best:.4} vs baseline {base:.4} ({:.2}x)",
            best / base
        ),
    )
}

// ------------------------------------------------------------------ 6

fn overfit(data: &ToyData, dir: &Path) -> Result<Outcome> {
    let mut args = vec![
        "train".to_string(),
        "--variant".into(),
        "HE-AGCRCNN".into(),
        "--epochs".into(),
        "200".into(),
    ];
    args.extend(data.data_args("corpus.jsonl"));
    args.extend(TOY_DIMS.iter().map(|a| a.to_string()));
    cli(dir, &strs(&args))?;
    let log = read_jsonl(&dir.join("train_log.jsonl"))?;
    let (best_epoch, best) = log
        .iter()
        .map(|l| (l["epoch"].as_u64().unwrap_or(0), l["micro_f1"].as_f64().unwrap_or(0.0)))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    outcome(
        best >= OVERFIT_TARGET,
        format!(
            "best training micro-F1 {best:.4} at epoch {best_epoch} of {} (target {OVERFIT_TARGET})",
            log.len()
        ),
    )
}

// ------------------------------------------------------------------ 7

/// Exact weighted-minus-unweighted loss on a hand-built alpha table.
fn analytic_he_delta() -> Result<(f64, f64)> {
    let labels: Vec<String> = ["A", "B", "C", "D"].iter().map(|l| l.to_string()).collect();
    let table = EmbeddingTable::new(labels.clone(), 2, vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0, -1.0, 0.0])?;
    let emb = LabelEmbedding { table };
    let positives = BTreeSet::from(["A".to_string()]);
    let alpha = alpha_weights(&emb, &positives, &labels)?.dense(&labels);
    let lengths = [0.8, 0.5, 0.3, 0.05];
    let targets = [true, false, false, false];
    let p = 1.5;
    let mp = MarginParams::default();
    let weighted = margin_loss(&lengths, &targets, &alpha, p, &mp);
    let plain = margin_loss(&lengths, &targets, &[1.0; 4], 1.0, &mp);
    // B sits at 45° to A (alpha = 1 - 1/sqrt 2), C is orthogonal and D
    // opposite (both alpha = 1); D's length is below m-.
    let alpha_b = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
    let expected = 0.5 * ((p * alpha_b - 1.0) * 0.4f64.powi(2) + (p - 1.0) * 0.2f64.powi(2));
    Ok((weighted - plain, expected))
}

fn ablation(data: &ToyData, dir: &Path) -> Result<Outcome> {
    let mut args = vec!["ablate".to_string(), "--epochs".into(), "30".into()];
    args.extend(data.data_args("corpus.jsonl"));
    args.extend(TOY_DIMS.iter().map(|a| a.to_string()));
    cli(dir, &strs(&args))?;
    let report = read_json(&dir.join("ablation.json"))?;
    let rows = report["variants"].as_array().context("variants array")?;
    let mut weakest = (String::new(), f64::INFINITY);
    for row in rows {
        let red = row["loss_reduction"].as_f64().context("loss_reduction")?;
        if red < weakest.1 {
            weakest = (row["variant"].as_str().unwrap_or("?").to_string(), red);
        }
    }
    let (delta, expected) = analytic_he_delta()?;
    let delta_ok = (delta - expected).abs() < 1e-12 && delta != 0.0;
    outcome(
        rows.len() == 13 && weakest.1 >= LOSS_REDUCTION_TARGET && delta_ok,
        format!(
            "{} variants, smallest loss reduction {:.1}% ({}); weighted-loss delta {delta:.12} vs analytic {expected:.12}",
            rows.len(),
            100.0 * weakest.1,
            weakest.0
        ),
    )
}

// ------------------------------------------------------------------ 8

fn micro_f1(pairs: &[(BTreeSet<String>, BTreeSet<String>)]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (truth, pred) in pairs {
        tp += truth.intersection(pred).count();
        fp += pred.difference(truth).count();
        fn_ += truth.difference(pred).count();
    }
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

fn transfer(data: &ToyData, dir: &Path) -> Result<Outcome> {
    let mut args = vec![
        "train".to_string(),
        "--variant".into(),
        "HE-AGCRCNN".into(),
        "--epochs".into(),
        "200".into(),
    ];
    args.extend(data.data_args("single.jsonl"));
    args.extend(TOY_DIMS.iter().map(|a| a.to_string()));
    cli(dir, &strs(&args))?;
    let model = dir.join("model.agcr");
    let mut eval = vec!["eval".to_string()];
    eval.extend(data.eval_args(&model, "multi.jsonl"));
    cli(dir, &strs(&eval))?;
    eval[0] = "predict".into();
    cli(dir, &strs(&eval))?;
    let threshold_f1 = read_json(&dir.join("metrics.json"))?["micro_f1"]
        .as_f64()
        .context("micro_f1")?;

    let truth: HashMap<String, BTreeSet<String>> = load_corpus(data.path("multi.jsonl"))?
        .into_iter()
        .map(|d| (d.id, d.labels))
        .collect();
    let mut top1 = Vec::new();
    for p in read_jsonl(&dir.join("predictions.jsonl"))? {
        let id = p["id"].as_str().context("id")?;
        let best = p["scores"]
            .as_object()
            .context("scores")?
            .iter()
            .map(|(l, v)| (l.clone(), v.as_f64().unwrap_or(f64::NEG_INFINITY)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
            .context("no scores")?;
        top1.push((truth[id].clone(), BTreeSet::from([best.0])));
    }
    let top1_f1 = micro_f1(&top1);
    outcome(
        threshold_f1 > top1_f1,
        format!(
            "threshold-rule micro-F1 {threshold_f1:.4} vs top-1 {top1_f1:.4} on {} multi-label documents",
            top1.len()
        ),
    )
}

// ------------------------------------------------------------------ 9

fn pipeline_run(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let data = ToyData::prepare(dir.to_path_buf())?;
    let mut args = vec!["train".to_string(), "--epochs".into(), "3".into()];
    args.extend(data.data_args("corpus.jsonl"));
    args.extend(TOY_DIMS.iter().map(|a| a.to_string()));
    cli(dir, &strs(&args))?;
    let model = dir.join("model.agcr");
    let mut eval = vec!["eval".to_string()];
    eval.extend(data.eval_args(&model, "corpus.jsonl"));
    cli(dir, &strs(&eval))?;
    eval[0] = "attn-dump".into();
    cli(dir, &strs(&eval))?;
    [
        "words.vec",
        "labels.vec",
        "model.agcr",
        "metrics.json",
        "attention.csv",
        "lengths.csv",
    ]
    .iter()
    .map(|f| Ok((f.to_string(), fs::read(dir.join(f))?)))
    .collect()
}

fn determinism(root: &Path) -> Result<Outcome> {
    let a = pipeline_run(&root.join("a"))?;
    let b = pipeline_run(&root.join("b"))?;
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts bit-identical across two runs", a.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

// ------------------------------------------------------------------ driver

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path().to_path_buf();
    let toy = ToyData::prepare(root.join("toy"));

    type Check<'a> = Box<dyn FnOnce() -> Result<Outcome> + 'a>;
    let with_toy = |f: fn(&ToyData, &Path) -> Result<Outcome>, sub: &'static str| -> Check<'_> {
        let toy = &toy;
        let root = &root;
        Box::new(move || match toy {
            Ok(t) => f(t, &root.join(sub)),
            Err(e) => bail!("toy data preparation failed: {e:#}"),
        })
    };
    let criteria: Vec<(u32, &str, Duration, Check)> = vec![
        (
            1,
            "numerics invariants",
            Duration::from_secs(60),
            Box::new(numerics_invariants),
        ),
        (
            2,
            "gradient checks",
            Duration::from_secs(180),
            Box::new(gradient_checks),
        ),
        (
            3,
            "graph pipeline oracles",
            Duration::from_secs(60),
            Box::new(graph_oracles),
        ),
        (4, "normalization golden row", Duration::MAX, Box::new(golden_row)),
        (
            5,
            "taxonomy embedding",
            Duration::from_secs(120),
            Box::new(taxonomy_embedding),
        ),
        (
            6,
            "end-to-end overfit",
            Duration::from_secs(600),
            with_toy(overfit, "overfit"),
        ),
        (
            7,
            "ablation grid",
            Duration::from_secs(3600),
            with_toy(ablation, "ablation"),
        ),
        (
            8,
            "transfer protocol",
            Duration::from_secs(600),
            with_toy(transfer, "transfer"),
        ),
        (
            9,
            "determinism",
            Duration::MAX,
            Box::new(|| determinism(&root.join("determinism"))),
        ),
    ];

    let mut unexpected = Vec::new();
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) if elapsed > limit => (
                false,
                format!("{}; exceeded {}s runtime budget", o.detail, limit.as_secs()),
            ),
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        let verdict = match (pass, KNOWN_UNMET.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected.push(id);
                "FAIL"
            }
        };
        println!(
            "criterion {id} [{name}]: {verdict} — {detail} ({:.1}s)",
            elapsed.as_secs_f64()
        );
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
