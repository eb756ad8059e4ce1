use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sherlock_core::container::Container;
use tempfile::TempDir;

fn sherlock(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sherlock"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sherlock(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Synthetic corpus split into train/val/test with a paragraph model and
/// both feature matrices.
struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let d = dir.path();
        ok(d, &["synth", "--out", "corpus.jsonl", "--embeddings-out", "emb.txt", "--rules-out", "rules.json", "--columns-per-type", "25"]);
        ok(d, &["ingest", "--input", "corpus.jsonl", "--out-dir", "split", "--min-count", "5", "--coverage-threshold", "0"]);
        ok(d, &["features", "--corpus", "split/train.jsonl", "--embeddings", "emb.txt", "--fit-paragraph", "pv.bin", "--paragraph-epochs", "3", "--out", "train.csv"]);
        ok(d, &["features", "--corpus", "split/val.jsonl", "--embeddings", "emb.txt", "--paragraph", "pv.bin", "--out", "val.csv"]);
        Workspace { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn help_and_version_exit_zero() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&sherlock(dir.path(), &["--help"])), 0);
    assert_eq!(code(&sherlock(dir.path(), &["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&sherlock(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&sherlock(dir.path(), &["train", "--model", "nn", "--bogus"])), 1);
    let out = sherlock(dir.path(), &["train", "--model", "tree", "--out", "t.bin"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--matrix"));
}

#[test]
fn missing_file_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let out = sherlock(dir.path(), &["predict", "--model", "absent.bin", "--input", "t.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.bin"));
}

#[test]
fn ingest_is_reproducible_under_seed() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "c.jsonl", "--columns-per-type", "10"]);
    ok(d, &["--seed", "4", "ingest", "--input", "c.jsonl", "--out-dir", "a", "--min-count", "1"]);
    ok(d, &["--seed", "4", "ingest", "--input", "c.jsonl", "--out-dir", "b", "--min-count", "1"]);
    ok(d, &["--seed", "5", "ingest", "--input", "c.jsonl", "--out-dir", "c", "--min-count", "1"]);
    let read = |p: &str| std::fs::read(d.join(p)).unwrap();
    assert_eq!(read("a/train.jsonl"), read("b/train.jsonl"));
    assert_eq!(read("a/test.jsonl"), read("b/test.jsonl"));
    assert_ne!(read("a/train.jsonl"), read("c/train.jsonl"));
}

#[test]
fn train_predict_evaluate_round_trip() {
    let ws = Workspace::new();
    let d = ws.path();
    ok(d, &["train", "--model", "tree", "--matrix", "train.csv", "--paragraph", "pv.bin", "--out", "tree.bin"]);
    ok(d, &["train", "--model", "tree", "--matrix", "train.csv", "--paragraph", "pv.bin", "--out", "tree2.bin"]);
    assert_eq!(std::fs::read(ws.file("tree.bin")).unwrap(), std::fs::read(ws.file("tree2.bin")).unwrap());

    std::fs::write(ws.file("table.csv"), "x,y\n1999,Pass\n2004,Fail\n1987,Pass\n2012,Pass\n").unwrap();
    let predictions = ok(d, &["predict", "--model", "tree.bin", "--input", "table.csv", "--embeddings", "emb.txt"]);
    let lines: Vec<&str> = predictions.lines().collect();
    assert_eq!(lines[0], "column,header,prediction,confidence");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,x,"));
    assert!(lines[2].starts_with("1,y,"));
    let again = ok(d, &["predict", "--model", "tree.bin", "--input", "table.csv", "--embeddings", "emb.txt"]);
    assert_eq!(predictions, again);

    let rejected = ok(d, &["predict", "--model", "tree.bin", "--input", "table.csv", "--embeddings", "emb.txt", "--reject-below", "1.0"]);
    for line in rejected.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let confidence: f64 = fields[3].parse().unwrap();
        assert!(fields[2] == "rejected" || confidence >= 1.0, "{line}");
    }

    ok(d, &["features", "--corpus", "split/test.jsonl", "--embeddings", "emb.txt", "--paragraph", "tree.bin", "--out", "test.csv"]);
    ok(d, &["evaluate", "--model", "tree.bin", "--matrix", "test.csv", "--report", "report.json", "--rejection-curve", "curve.csv", "--bootstrap", "50"]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ws.file("report.json")).unwrap()).unwrap();
    let f1 = report["weighted_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    assert!(report["bootstrap"]["lower"].as_f64().unwrap() <= report["bootstrap"]["upper"].as_f64().unwrap());
    let curve = std::fs::read_to_string(ws.file("curve.csv")).unwrap();
    let first: Vec<&str> = curve.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[2].parse::<f64>().unwrap(), f1);
}

#[test]
fn nn_training_writes_metrics_log_and_honors_config() {
    let ws = Workspace::new();
    let d = ws.path();
    std::fs::write(ws.file("train.cfg"), "# quick run\nepochs = 50\nlearning_rate = 0.001\n").unwrap();
    ok(d, &[
        "train", "--model", "nn", "--matrix", "train.csv", "--val", "val.csv", "--paragraph", "pv.bin",
        "--config", "train.cfg", "--epochs", "2", "--metrics-log", "log.jsonl", "--out", "nn.bin",
    ]);
    let log = std::fs::read_to_string(ws.file("log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    for line in log.lines() {
        let entry: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(entry["train_loss"].as_f64().unwrap().is_finite());
    }
    let container = Container::load(ws.file("nn.bin")).unwrap();
    assert_eq!(container.metadata.hyperparameters["epochs"], 2);
    assert_eq!(container.metadata.hyperparameters["learning_rate"], 0.001);

    std::fs::write(ws.file("bad.cfg"), "epochs = many\n").unwrap();
    let out = sherlock(d, &["train", "--model", "nn", "--matrix", "train.csv", "--paragraph", "pv.bin", "--config", "bad.cfg", "--out", "x.bin"]);
    assert_ne!(code(&out), 0);
}

#[test]
fn matching_models_predict_without_embeddings() {
    let ws = Workspace::new();
    let d = ws.path();
    ok(d, &["train", "--model", "dictionary", "--corpus", "split/train.jsonl", "--out", "dict.bin"]);
    ok(d, &["train", "--model", "regex", "--rules", "rules.json", "--out", "regex.bin"]);
    std::fs::write(ws.file("table.csv"), "h\n978-3-16-148410-0\n0-306-40615-2\n").unwrap();
    let out = ok(d, &["predict", "--model", "regex.bin", "--input", "table.csv"]);
    assert_eq!(out.lines().nth(1).unwrap(), "0,h,isbn,");
    ok(d, &["evaluate", "--model", "dict.bin", "--corpus", "split/test.jsonl", "--report", "dict.json"]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ws.file("dict.json")).unwrap()).unwrap();
    assert!(report["weighted_f1"].as_f64().unwrap() > 0.0);
}

#[test]
fn schema_hash_mismatch_is_rejected() {
    let ws = Workspace::new();
    let d = ws.path();
    ok(d, &["train", "--model", "tree", "--matrix", "train.csv", "--paragraph", "pv.bin", "--max-depth", "3", "--out", "tree.bin"]);
    let mut container = Container::load(ws.file("tree.bin")).unwrap();
    container.metadata.schema_hash = "0".repeat(64);
    container.save(ws.file("tampered.bin")).unwrap();
    std::fs::write(ws.file("table.csv"), "h\n1\n2\n").unwrap();
    let out = sherlock(d, &["predict", "--model", "tampered.bin", "--input", "table.csv", "--embeddings", "emb.txt"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn benchmark_reports_all_models_with_file_sizes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "corpus.jsonl", "--embeddings-out", "emb.txt", "--rules-out", "rules.json", "--columns-per-type", "20"]);
    let table = ok(d, &[
        "benchmark", "--corpus", "corpus.jsonl", "--embeddings", "emb.txt", "--rules", "rules.json",
        "--out-dir", "bench", "--epochs", "2", "--paragraph-epochs", "2",
    ]);
    assert!(table.starts_with("model"));
    let mut reader = csv::Reader::from_path(d.join("bench/benchmark.csv")).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, ["model", "weighted_f1", "runtime_per_sample_secs", "size_bytes"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let models: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(models, ["nn", "tree", "forest", "dictionary", "regex"]);
    for row in &rows {
        let on_disk = std::fs::metadata(d.join(format!("bench/{}.bin", &row[0]))).unwrap().len();
        assert_eq!(row[3].parse::<u64>().unwrap(), on_disk);
        assert!(d.join(format!("bench/{}.report.json", &row[0])).exists());
    }
}
