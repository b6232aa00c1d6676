use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphcaps"))
        .env("RUST_LOG", "warn")
        .args(["--serial", "--out-dir"])
        .arg(dir)
        .args(args)
        .output()
        .expect("spawn CLI")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn memorizes_a_small_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["toy", "--docs", "12", "--single-fraction", "1"]);
    ok(
        d,
        &[
            "embed-words",
            "--corpus",
            &p(d, "corpus.jsonl"),
            "--dim",
            "8",
            "--epochs",
            "3",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--variant",
            "AGCRCNN",
            "--corpus",
            &p(d, "corpus.jsonl"),
            "--embeddings",
            &p(d, "words.vec"),
            "--taxonomy",
            &p(d, "taxonomy.tsv"),
            "--rows",
            "8",
            "--row-len",
            "10",
            "--k1",
            "8",
            "--k2",
            "16",
            "--caps-dim",
            "4",
            "--caps-channels",
            "4",
            "--digit-dim",
            "8",
            "--batch",
            "4",
            "--lr",
            "0.01",
            "--epochs",
            "150",
        ],
    );
    let table = ok(
        d,
        &[
            "eval",
            "--model",
            &p(d, "model.agcr"),
            "--corpus",
            &p(d, "corpus.jsonl"),
            "--embeddings",
            &p(d, "words.vec"),
        ],
    );
    let metrics: Value = serde_json::from_str(&fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["micro_f1"], 1.0, "{table}");
    assert_eq!(metrics["macro_f1"], 1.0, "{table}");

    let manifest: Value = serde_json::from_str(&fs::read_to_string(d.join("train.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn gradcheck_command_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["gradcheck", "--variant", "HE-AGCRCNN"]);
    assert!(out.contains("max relative error"));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("gradcheck.json")).unwrap()).unwrap();
    assert!(report["max_relative_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let missing = run(d, &["prep", "--corpus", &p(d, "absent.jsonl")]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let usage = run(d, &["train", "--variant"]);
    assert_eq!(usage.status.code(), Some(2));

    ok(d, &["toy", "--docs", "4"]);
    let bad_variant = run(
        d,
        &[
            "train",
            "--variant",
            "NOPE",
            "--corpus",
            &p(d, "corpus.jsonl"),
            "--embeddings",
            &p(d, "corpus.jsonl"),
        ],
    );
    assert_eq!(bad_variant.status.code(), Some(1));
}

#[test]
fn prep_writes_matrices_and_tensors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["toy", "--docs", "5"]);
    ok(
        d,
        &[
            "embed-words",
            "--corpus",
            &p(d, "corpus.jsonl"),
            "--dim",
            "4",
            "--epochs",
            "1",
        ],
    );
    ok(
        d,
        &[
            "prep",
            "--corpus",
            &p(d, "corpus.jsonl"),
            "--embeddings",
            &p(d, "words.vec"),
            "--rows",
            "4",
            "--row-len",
            "6",
        ],
    );
    let lines = fs::read_to_string(d.join("matrices.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 5);
    let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["rows"].as_array().unwrap().len(), 4);
    assert_eq!(fs::read_dir(d.join("tensors")).unwrap().count(), 5);
}
