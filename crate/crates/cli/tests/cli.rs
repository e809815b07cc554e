use serde_json::{json, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn clids(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clids")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Two well separated classes; `dims` numeric columns plus a protocol.
fn blobs_csv(n: usize, dims: usize, seed: u64) -> String {
    let mut s = String::new();
    let cols: Vec<String> = (0..dims).map(|i| format!("x{i}")).collect();
    writeln!(s, "{},proto,label", cols.join(",")).unwrap();
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut jitter = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 0.1
    };
    for i in 0..n {
        let mal = i % 2 == 1;
        let c = if mal { 0.85 } else { 0.15 };
        let xs: Vec<String> = (0..dims).map(|_| format!("{:.4}", c + jitter())).collect();
        let (proto, label) = if mal { ("tcp", "attack") } else { ("udp", "normal") };
        writeln!(s, "{},{proto},{label}", xs.join(",")).unwrap();
    }
    s
}

fn schema(dims: usize) -> Value {
    let mut cols: Vec<Value> = (0..dims).map(|i| json!({"name": format!("x{i}"), "kind": "numeric"})).collect();
    cols.push(json!({"name": "proto", "kind": "categorical"}));
    cols.push(json!({"name": "label", "kind": "label"}));
    json!({"columns": cols, "label_mapping": {"normal": 0, "attack": 1}})
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let w = Workspace { dir: tempfile::tempdir().unwrap() };
        fs::write(w.path("train.csv"), blobs_csv(200, 2, 1)).unwrap();
        fs::write(w.path("test.csv"), blobs_csv(60, 2, 2)).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, kind: &str, params: Value, extra: Value) -> String {
        let mut cfg = json!({
            "config_version": 1,
            "data": {"train": "train.csv", "test": "test.csv", "schema": schema(2)},
            "model": {"kind": kind, "params": params},
            "output_dir": format!("out_{kind}"),
            "seed": 11,
        });
        if let (Value::Object(c), Value::Object(e)) = (&mut cfg, extra) {
            c.extend(e);
        }
        fs::write(self.path(name), serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        name.to_string()
    }

    fn run(&self, args: &[&str]) -> Output {
        clids(args, self.dir.path())
    }

    fn ok(&self, args: &[&str]) -> Output {
        let o = self.run(args);
        assert_eq!(code(&o), 0, "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
        o
    }
}

fn small_som() -> Value {
    json!({"rows": 4, "cols": 4, "epochs": 1500})
}

#[test]
fn train_writes_model_and_quality() {
    let w = Workspace::new();
    let cfg = w.config("som.json", "som", small_som(), json!({}));
    w.ok(&["train", "--config", &cfg]);
    let model: Value = serde_json::from_str(&fs::read_to_string(w.path("out_som/model.json")).unwrap()).unwrap();
    assert_eq!(model["model"]["kind"], "som");
    assert_eq!(model["seed"], 11);
    // Two numeric columns plus a one-hot pair for the protocol.
    assert_eq!(model["features"].as_array().unwrap().len(), 4);
    let q: Value = serde_json::from_str(&fs::read_to_string(w.path("out_som/quality.json")).unwrap()).unwrap();
    assert_eq!(q["network_size"], 1);
    assert!(q["quality"].is_object());
}

#[test]
fn missing_csv_is_a_data_error() {
    let w = Workspace::new();
    fs::remove_file(w.path("train.csv")).unwrap();
    let cfg = w.config("som.json", "som", small_som(), json!({}));
    let o = w.run(&["train", "--config", &cfg]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.csv"));
}

#[test]
fn config_errors_exit_two() {
    let w = Workspace::new();
    assert_eq!(code(&w.run(&["train", "--config", "absent.json"])), 2);
    let cfg = w.config("bad.json", "som", json!({"rows": 1}), json!({}));
    assert_eq!(code(&w.run(&["train", "--config", &cfg])), 2);
    let cfg = w.config("typo.json", "som", small_som(), json!({"sead": 3}));
    assert_eq!(code(&w.run(&["train", "--config", &cfg])), 2);
    assert_eq!(code(&w.run(&["train"])), 2);
}

#[test]
fn pruning_a_flat_map_is_rejected() {
    let w = Workspace::new();
    let cfg = w.config("som.json", "som", small_som(), json!({}));
    w.ok(&["train", "--config", &cfg]);
    let o = w.run(&["prune", "--config", &cfg, "--model", "out_som/model.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn evaluate_on_separable_data() {
    let w = Workspace::new();
    let cfg = w.config("som.json", "som", small_som(), json!({}));
    w.ok(&["train", "--config", &cfg]);
    w.ok(&["evaluate", "--config", &cfg, "--model", "out_som/model.json"]);
    let csv = fs::read_to_string(w.path("out_som/eval.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), 9);
    assert_eq!(lines[1].split(',').count(), 9);
    let e: Value = serde_json::from_str(&fs::read_to_string(w.path("out_som/eval.json")).unwrap()).unwrap();
    assert_eq!(e["report"]["accuracy"], 1.0);
    assert_eq!(e["report"]["confusion"]["tp"], 30);
}

#[test]
fn dimension_mismatch_is_a_data_error() {
    let w = Workspace::new();
    let cfg = w.config("som.json", "som", small_som(), json!({}));
    w.ok(&["train", "--config", &cfg]);
    fs::write(w.path("wide.csv"), blobs_csv(20, 3, 5)).unwrap();
    let o = w.run(&["evaluate", "--model", "out_som/model.json", "--test", "wide.csv"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn ghsom_pipeline_prunes_and_explains() {
    let w = Workspace::new();
    let cfg = w.config("ghsom.json", "ghsom", json!({}), json!({"prune": {"delta": 0.3}}));
    w.ok(&["train", "--config", &cfg]);
    let o = w.ok(&["prune", "--config", &cfg, "--model", "out_ghsom/model.json"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("maps") && stdout.contains('%'), "{stdout}");
    let report: Value = serde_json::from_str(&fs::read_to_string(w.path("out_ghsom/prune_report.json")).unwrap()).unwrap();
    assert!(report["maps_after"].as_u64().unwrap() <= report["maps_before"].as_u64().unwrap());

    let samples: String = blobs_csv(3, 2, 9).lines().map(|l| format!("{l}\n")).collect();
    fs::write(w.path("samples.csv"), samples).unwrap();
    w.ok(&["explain", "--model", "out_ghsom/model.json", "--samples", "samples.csv", "--out", "ex"]);
    let names: Vec<String> =
        fs::read_dir(w.path("ex")).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    let has = |s: &str| names.iter().any(|n| n == s);
    assert!(has("ghsom_treemap_0.svg") && has("ghsom_treemap_0.json"));
    assert!(has("ghsom_global_significance_all.svg"));
    assert!(has("ghsom_u_matrix_0.svg") && has("ghsom_label_map_0.json"));
    let locals = names.iter().filter(|n| n.contains("local_explanation") && n.ends_with(".json")).count();
    assert_eq!(locals, 3);
    let svg = fs::read_to_string(w.path("ex/ghsom_treemap_0.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn search_logs_every_trial() {
    let w = Workspace::new();
    let space = json!({"search": {"budget": 5, "space": {"learning_rate": {"scale": "linear", "low": 0.05, "high": 0.5}}}});
    let cfg = w.config("search.json", "som", small_som(), space);
    w.ok(&["search", "--config", &cfg]);
    let log = fs::read_to_string(w.path("out_som/trials.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 5);
    for line in log.lines() {
        let t: Value = serde_json::from_str(line).unwrap();
        let lr = t["params"]["learning_rate"].as_f64().unwrap();
        assert!((0.05..=0.5).contains(&lr));
    }
    let best: Value = serde_json::from_str(&fs::read_to_string(w.path("out_som/best_params.json")).unwrap()).unwrap();
    assert_eq!(best["params"]["rows"], 4);
}

#[test]
fn training_is_reproducible() {
    let w = Workspace::new();
    let cfg = w.config("gsom.json", "gsom", json!({}), json!({}));
    w.ok(&["train", "--config", &cfg, "--out", "a"]);
    w.ok(&["train", "--config", &cfg, "--out", "b"]);
    let strip = |p: &str| {
        let mut v: Value = serde_json::from_str(&fs::read_to_string(w.path(p)).unwrap()).unwrap();
        v["train_time_s"] = json!(0);
        v
    };
    assert_eq!(strip("a/model.json"), strip("b/model.json"));
    w.ok(&["train", "--config", &cfg, "--out", "c", "--seed", "12"]);
    assert_ne!(strip("a/model.json")["model"], strip("c/model.json")["model"]);
}

#[test]
fn preprocess_writes_encoder_and_features() {
    let w = Workspace::new();
    let cfg = w.config("som.json", "som", small_som(), json!({}));
    w.ok(&["preprocess", "--config", &cfg]);
    let csv = fs::read_to_string(w.path("out_som/train_features.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    assert!(w.path("out_som/preprocessor.json").exists());
    assert!(w.path("out_som/significance.json").exists());
}
