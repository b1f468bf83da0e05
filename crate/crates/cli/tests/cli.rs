use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = r#"
task = "Write a one-sentence scene description."
seed = 1

[engine]
target_size = 30
"#;

fn divgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divgen")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    (dir, cfg)
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn lines(p: &Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_smoke_and_manifest() {
    let (dir, cfg) = setup();
    let out = dir.path().join("run");
    let o = divgen(&["generate", "--config", s(&cfg), "--out", s(&out), "--trace"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(lines(&out.join("dataset.jsonl")), 30);
    assert_eq!(lines(&out.join("embeddings.jsonl")), 30);
    assert!(lines(&out.join("trace.jsonl")) > 30);
    let report = json(&out.join("report.json"));
    for field in ["lexical", "cosine", "vendi", "effective_rank_approx", "n", "llm_calls", "rejection_trace"] {
        assert!(!report[field].is_null(), "missing {field}");
    }
    assert_eq!(report["n"], 30);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["status"], "completed");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    for f in manifest["outputs"].as_array().unwrap() {
        let meta = std::fs::metadata(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(meta.len(), f["bytes"].as_u64().unwrap());
    }
}

#[test]
fn same_seed_gives_identical_dataset() {
    let (dir, cfg) = setup();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(divgen(&["generate", "--config", s(&cfg), "--out", s(out)]).status.code(), Some(0));
    }
    let read = |p: &Path| std::fs::read(p.join("dataset.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
    let c = dir.path().join("c");
    divgen(&["generate", "--config", s(&cfg), "--out", s(&c), "--seed", "2"]);
    assert_ne!(read(&a), read(&c));
}

#[test]
fn unreachable_endpoint_fails_cleanly() {
    let (dir, cfg) = setup();
    let out = dir.path().join("run");
    // Leftovers from an earlier run must not survive a failed one.
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join("dataset.jsonl"), "stale\n").unwrap();
    let o = divgen(&[
        "generate",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--set",
        "provider.kind=\"http\"",
        "--set",
        "provider.endpoint=\"http://127.0.0.1:9\"",
        "--set",
        "provider.max_retries=1",
        "--set",
        "provider.retry_backoff_ms=1",
        "--set",
        "provider.timeout_secs=2",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(!out.join("dataset.jsonl").exists());
    assert!(!out.join("report.json").exists());
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["status"], "failed");
    assert!(manifest["error"].as_str().unwrap().contains("attempt"));
    assert!(manifest["outputs"].as_array().unwrap().is_empty());
}

#[test]
fn budget_exhaustion_then_resume() {
    let (dir, cfg) = setup();
    let out = dir.path().join("run");
    let base = ["generate", "--config", s(&cfg), "--out", s(&out), "--set", "engine.target_size=200"];
    let mut first = base.to_vec();
    first.extend(["--set", "engine.max_iterations=2"]);
    let o = divgen(&first);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(json(&out.join("manifest.json"))["status"], "budget_exhausted");
    let partial = lines(&out.join("dataset.jsonl"));
    assert!(partial < 200);
    assert!(out.join("snapshot.json").exists());

    let mut again = base.to_vec();
    again.extend(["--set", "engine.max_iterations=4", "--resume"]);
    let o = divgen(&again);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
    let resumed = std::fs::read_to_string(out.join("dataset.jsonl")).unwrap();
    assert!(resumed.lines().count() > partial);
}

#[test]
fn config_errors_exit_3_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "task = \"x\"\n[engine]\nbeam_wdith = 2\n").unwrap();
    let o = divgen(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("beam_wdith") && err.contains("line 3"), "{err}");

    std::fs::write(&cfg, "task = \"x\"\n[kernel]\nw_rbf = 0.9\n").unwrap();
    let o = divgen(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("sum to 1"));

    std::fs::write(&cfg, "seed = 3\n").unwrap();
    let o = divgen(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn baseline_call_counts_and_usage_errors() {
    let (dir, cfg) = setup();
    for (kind, calls) in [("hierarchical", 55), ("default", 5)] {
        let out = dir.path().join(kind);
        let o = divgen(&["baseline", kind, "--config", s(&cfg), "--out", s(&out), "--set", "engine.target_size=50"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let report = json(&out.join("report.json"));
        let l = &report["llm_calls"];
        let generation = l["generate"].as_u64().unwrap() + l["gradient_get"].as_u64().unwrap() + l["gradient_apply"].as_u64().unwrap();
        assert_eq!(generation, calls, "{kind}");
        assert_eq!(report["method"], kind);
        let first: Value = serde_json::from_str(std::fs::read_to_string(out.join("dataset.jsonl")).unwrap().lines().next().unwrap()).unwrap();
        assert_eq!(first["method"], kind);
    }
    let o = divgen(&["baseline", "nucleus", "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unknown baseline"));
    assert_eq!(divgen(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(divgen(&["--help"]).status.code(), Some(0));
}

fn record(id: &str, text: &str) -> String {
    format!("{{\"id\":\"{id}\",\"text\":\"{text}\",\"explorer_id\":\"e0\",\"iteration\":0,\"marginal_gain\":1.0,\"method\":\"file\"}}\n")
}

#[test]
fn evaluate_trivial_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("same.jsonl");
    let body: String = (0..5).map(|i| record(&format!("d{i}"), "A red kite over the harbor")).collect();
    std::fs::write(&data, body).unwrap();
    let out = dir.path().join("r.json");
    let o = divgen(&["evaluate", s(&data), "--mock", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out);
    assert!((r["vendi"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(r["lexical"]["mean"].as_f64().unwrap().abs() < 1e-12);
    assert!(r["cosine"]["mean"].as_f64().unwrap().abs() < 1e-12);

    let pair = dir.path().join("pair.jsonl");
    std::fs::write(&pair, record("a", "ocean waves at dawn") + "{not json}\n" + &record("b", "a quiet library corner")).unwrap();
    let o = divgen(&["evaluate", s(&pair), "--mock", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("pair.jsonl:2"), "{}", stderr(&o));
    let r = json(&out);
    assert_eq!(r["n"], 2);
    // A single pair has zero spread.
    assert_eq!(r["lexical"]["std"].as_f64().unwrap(), 0.0);
    assert!(r["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains(":2:")));

    let o = divgen(&["evaluate", s(&pair), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3), "missing embeddings without a provider");
}

#[test]
fn evaluate_reproduces_engine_report() {
    let (dir, cfg) = setup();
    let out = dir.path().join("run");
    assert_eq!(divgen(&["generate", "--config", s(&cfg), "--out", s(&out)]).status.code(), Some(0));
    let re = dir.path().join("re.json");
    assert_eq!(divgen(&["evaluate", s(&out.join("dataset.jsonl")), "--out", s(&re)]).status.code(), Some(0));
    let (a, b) = (json(&out.join("report.json")), json(&re));
    for path in [&["vendi"][..], &["effective_rank_approx"], &["lexical", "mean"], &["lexical", "std"], &["cosine", "mean"], &["cosine", "std"]] {
        let get = |v: &Value| path.iter().fold(v.clone(), |v, k| v[*k].clone()).as_f64().unwrap();
        assert!((get(&a) - get(&b)).abs() <= 1e-9, "{path:?}");
    }
}

#[test]
fn compare_tables() {
    let (dir, cfg) = setup();
    let eng = dir.path().join("engine");
    let def = dir.path().join("default");
    assert_eq!(divgen(&["generate", "--config", s(&cfg), "--out", s(&eng), "--trace"]).status.code(), Some(0));
    assert_eq!(divgen(&["baseline", "default", "--config", s(&cfg), "--out", s(&def)]).status.code(), Some(0));
    let (er, dr) = (eng.join("report.json"), def.join("report.json"));

    let cmp = dir.path().join("cmp");
    let o = divgen(&["compare", s(&er), s(&dr), "--out", s(&cmp)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let c = json(&cmp.join("comparison.json"));
    let vendi = c["rows"].as_array().unwrap().iter().find(|r| r["metric"] == "vendi").unwrap();
    assert_eq!(vendi["best"], serde_json::json!([0]));
    let series = json(&cmp.join("rejection_series.json"));
    assert_eq!(series.as_array().unwrap().len(), 1);
    assert_eq!(series[0]["label"], "engine");

    let o = divgen(&["compare", s(&er), s(&er)]);
    let table = String::from_utf8_lossy(&o.stdout).into_owned();
    let vendi_line = table.lines().find(|l| l.starts_with("vendi")).unwrap();
    assert_eq!(vendi_line.matches("**=").count(), 2, "{table}");

    let o = divgen(&["compare", s(&dr), s(&er), s(&dr)]);
    let header = String::from_utf8_lossy(&o.stdout).lines().next().unwrap().to_string();
    let cols: Vec<&str> = header.split_whitespace().skip(1).collect();
    assert_eq!(cols, ["default#1", "engine", "default#3"]);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"method\": \"x\", \"n\": 3}").unwrap();
    let o = divgen(&["compare", s(&er), s(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing field"), "{}", stderr(&o));
    assert_eq!(divgen(&["compare", s(&er)]).status.code(), Some(3));
}

#[test]
fn init_threshold_reports_tau0() {
    let (_dir, cfg) = setup();
    let o = divgen(&["init-threshold", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let (tau0, det) = (v["tau0"].as_f64().unwrap(), v["det"].as_f64().unwrap());
    assert_eq!(tau0, (0.5 * det).clamp(1e-6, 0.9));
    assert_eq!(v["probes"], 100);
    assert_eq!(v["probe_calls"], 10);
}
