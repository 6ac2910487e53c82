use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ttm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ttm(dir, args);
    assert!(
        out.status.success(),
        "ttm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn edge_counts(model: &Value) -> (usize, usize) {
    let model: ttm_core::model::ProcessModel = serde_json::from_value(model.clone()).unwrap();
    (model.dependency_edge_count(), model.resource_edge_count())
}

#[test]
fn full_density_model_is_complete() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["generate", "--n", "3", "--m", "2", "--p", "1", "--q", "1", "--out", "m.json"]);
    let model = json(&dir.path().join("m.json"));
    assert_eq!(edge_counts(&model), (3, 6));
}

#[test]
fn same_seed_same_model() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["generate", "--seed", "17", "--out", "a.json"]);
    ok(dir.path(), &["generate", "--seed", "17", "--out", "b.json"]);
    ok(dir.path(), &["generate", "--seed", "18", "--out", "c.json"]);
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    assert_ne!(a, std::fs::read(dir.path().join("c.json")).unwrap());
}

#[test]
fn generate_writes_to_stdout_without_out() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["generate", "--n", "4", "--m", "3"]);
    let model: ttm_core::model::ProcessModel = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((model.n, model.m), (4, 3));
    model.ensure_valid().unwrap();
}

#[test]
fn pipeline_decodes_and_forecasts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--seed", "2", "--n", "8", "--m", "4", "--out", "m.json"]);
    ok(d, &["simulate", "--model", "m.json", "--seed", "9", "--obs-out", "o.json", "--obs-len", "15", "--out", "t.json"]);
    ok(d, &["train", "--model", "m.json", "--runs", "300", "--out", "h.json"]);
    ok(d, &["infer", "--hmm", "h.json", "--obs", "o.json", "--out", "i.json"]);
    let report = json(&d.join("i.json"));
    assert_eq!(report["path"].as_array().unwrap().len(), 15);
    assert!(report["log_prob"].as_f64().unwrap() <= report["log_likelihood"].as_f64().unwrap());

    ok(d, &["predict", "--model", "m.json", "--hmm", "h.json", "--obs", "o.json", "--ensemble-size", "40", "--out", "f.json"]);
    let forecast = json(&d.join("f.json"));
    assert_eq!(forecast["remaining_samples"].as_array().unwrap().len(), 40);
    let q = &forecast["quantiles"];
    assert!(q["p05"].as_f64().unwrap() <= q["p95"].as_f64().unwrap());
}

#[test]
fn observations_past_completion_forecast_zero() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--seed", "4", "--n", "5", "--m", "3", "--out", "m.json"]);
    ok(d, &["simulate", "--model", "m.json", "--seed", "1", "--out", "t.json"]);
    let total = json(&d.join("t.json"))["total_time"].as_f64().unwrap() as usize;
    let len = (total + 10).to_string();
    ok(d, &["simulate", "--model", "m.json", "--seed", "1", "--obs-out", "o.csv", "--obs-len", &len]);
    ok(d, &["train", "--model", "m.json", "--runs", "300", "--out", "h.json"]);
    ok(d, &["predict", "--model", "m.json", "--hmm", "h.json", "--obs", "o.csv", "--ensemble-size", "10", "--out", "f.json"]);
    let forecast = json(&d.join("f.json"));
    assert!(forecast["inferred_active"].as_array().unwrap().is_empty());
    assert!(forecast["remaining_samples"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
}

#[test]
fn train_accepts_trace_files() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--seed", "6", "--n", "6", "--m", "3", "--out", "m.json"]);
    ok(d, &["simulate", "--model", "m.json", "--runs", "50", "--out", "t.json"]);
    ok(d, &["train", "--model", "m.json", "--traces", "t.json", "--out", "a.json"]);
    ok(d, &["train", "--model", "m.json", "--runs", "50", "--out", "b.json"]);
    // simulate and train both use seeds 0..runs, so the HMMs agree
    assert_eq!(json(&d.join("a.json")), json(&d.join("b.json")));
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), r#"{"command": "generate", "n": 3, "m": 2, "p": 1, "q": 1, "out": "m.json"}"#).unwrap();
    ok(d, &["generate", "--config", "c.json"]);
    assert_eq!(edge_counts(&json(&d.join("m.json"))), (3, 6));
    ok(d, &["generate", "--config", "c.json", "--n", "4"]);
    assert_eq!(edge_counts(&json(&d.join("m.json"))), (6, 8));
}

#[test]
fn config_for_another_command_is_rejected() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"command": "sweep"}"#).unwrap();
    assert_eq!(ttm(dir.path(), &["generate", "--config", "c.json"]).status.code(), Some(2));
    std::fs::write(dir.path().join("c.json"), r#"{"command": "generate", "bogus": 1}"#).unwrap();
    assert_eq!(ttm(dir.path(), &["generate", "--config", "c.json"]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(ttm(d, &["generate", "--p", "1.5"]).status.code(), Some(2));
    assert_eq!(ttm(d, &["generate", "--workers", "0"]).status.code(), Some(2));
    assert_eq!(ttm(d, &["simulate", "--model", "missing.json"]).status.code(), Some(5));
    std::fs::write(d.join("bad.json"), "{").unwrap();
    assert_eq!(ttm(d, &["simulate", "--model", "bad.json"]).status.code(), Some(2));
    assert_eq!(ttm(d, &["simulate"]).status.code(), Some(2));
}

#[test]
fn impossible_observations_exit_with_decode_code() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    // a single activity needing no resource never emits anything
    ok(d, &["generate", "--n", "1", "--m", "1", "--q", "0", "--out", "m.json"]);
    ok(d, &["train", "--model", "m.json", "--runs", "20", "--out", "h.json"]);
    std::fs::write(d.join("o.json"), "[[0]]").unwrap();
    assert_eq!(ttm(d, &["infer", "--hmm", "h.json", "--obs", "o.json"]).status.code(), Some(4));
}

#[test]
fn sweep_writes_expected_files() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "sweep", "--n", "5", "--m-values", "3", "--p-values", "0.5", "--q-values", "0.5,0.8",
            "--samples", "3", "--sub-simulations", "60", "--test-runs", "10", "--max-len", "6",
            "--out", "res",
        ],
    );
    let res = d.join("res");
    for id in [0, 1] {
        let text = std::fs::read_to_string(res.join(format!("success_cell_{id:03}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("cell_id,m,p,q,noise,length,mean_success,band_low,band_high,sample_count")
        );
        assert_eq!(lines.count(), 6);
    }
    let cutoffs = std::fs::read_to_string(res.join("cutoffs.csv")).unwrap();
    assert!(cutoffs.starts_with("cell_id,threshold,required_length,achieved_rate\n"));
    let summary = json(&res.join("summary.json"));
    assert_eq!(summary["config"]["samples"], 3);
    assert!(res.join("timing.json").exists());
}
