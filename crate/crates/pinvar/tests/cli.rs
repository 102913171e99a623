//! End-to-end runs of the `pinvar` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pinvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinvar")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = pinvar(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_spring_samples_the_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spring.csv");
    ok(&["generate", "--problem", "spring", "--n", "1000", "--h", "1e-2", "--out", s(&out)]);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 1000);
    for &k in &[0usize, 1, 517, 999] {
        let t = k as f64 * 1e-2;
        let w = 3f64.sqrt();
        assert_eq!(rows[k][0], t);
        assert!((rows[k][1] - (w * t).sin()).abs() < 1e-15);
        assert!((rows[k][2] - w * (w * t).cos()).abs() < 1e-15);
    }
    assert!(dir.path().join("spring.csv.manifest.json").exists());
}

#[test]
fn generate_single_lorenz_row_is_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lorenz.csv");
    ok(&["generate", "--problem", "lorenz", "--n", "1", "--out", s(&out)]);
    assert_eq!(data_rows(&out), vec![vec![0.0, -3.0, -3.0, 28.0]]);
}

#[test]
fn usage_errors_exit_with_two() {
    let out = pinvar(&["generate", "--n", "10", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--problem"));
    assert_eq!(pinvar(&["generate", "--problem", "pendulum", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(
        pinvar(&["generate", "--problem", "lorenz", "--h", "0.1", "--out", "x.csv"]).status.code(),
        Some(2)
    );
    assert_eq!(pinvar(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = pinvar(&["report", "--results", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no results found"));
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    ok(&["generate", "--problem", "spring", "--n", "3000", "--h", "1e-2", "--out", s(&p("d.csv"))]);

    let train = |out: &Path| {
        ok(&[
            "train", "--data", s(&p("d.csv")), "--basis", "h2", "--p", "2", "--s", "1", "--wo", "0.5", "--r", "1e-8",
            "--train-start", "101", "--train-len", "500", "--out", s(out),
        ])
    };
    train(&p("m1.json"));
    train(&p("m2.json"));
    assert_eq!(fs::read(p("m1.json")).unwrap(), fs::read(p("m2.json")).unwrap());
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("m1.json")).unwrap()).unwrap();
    assert_eq!(model["m"], 15);
    assert_eq!(model["weights"].as_array().unwrap().len(), 30);
    assert_eq!(model["training"]["train_start"], 101);

    ok(&["predict", "--model", s(&p("m1.json")), "--data", s(&p("d.csv")), "--start", "1001", "--steps", "500", "--out", s(&p("pred.csv"))]);
    let pred = data_rows(&p("pred.csv"));
    let data = data_rows(&p("d.csv"));
    assert_eq!(pred.len(), 500);
    // prediction j carries the time of reference row start + j
    assert_eq!(pred[0][0], data[1001][0]);

    let out = ok(&["eval", "--pred", s(&p("pred.csv")), "--ref", s(&p("d.csv")), "--start", "1001", "--M", "1e-4", "--model", s(&p("m1.json"))]);
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(metrics["steps"], 500);
    assert_eq!(metrics["valid_time"], 500);
    assert!(metrics["energy"].as_f64().unwrap() < 1e-10);

    // the reference slice itself scores the full length
    let trimmed: String = fs::read_to_string(p("d.csv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .enumerate()
        .filter(|(i, _)| *i == 0 || (1002..=1501).contains(i))
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    fs::write(p("slice.csv"), trimmed).unwrap();
    let out = ok(&["eval", "--pred", s(&p("slice.csv")), "--ref", s(&p("d.csv")), "--start", "1001"]);
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(metrics["valid_time"], 500);
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    ok(&["generate", "--problem", "spring", "--n", "300", "--h", "1e-2", "--out", s(&p("d.csv"))]);
    let train = |len: &str| {
        pinvar(&[
            "train", "--data", s(&p("d.csv")), "--basis", "h1", "--wo", "0", "--r", "1e-12", "--p", "2",
            "--train-start", "10", "--train-len", len, "--out", s(&p("m.json")),
        ])
    };
    assert_eq!(train("0").status.code(), Some(1));
    assert_eq!(train("400").status.code(), Some(1));
    assert_eq!(train("100").status.code(), Some(0));

    ok(&["generate", "--problem", "lorenz", "--n", "300", "--out", s(&p("l.csv"))]);
    let out = pinvar(&["predict", "--model", s(&p("m.json")), "--data", s(&p("l.csv")), "--start", "100", "--steps", "10", "--out", s(&p("x.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
    assert_eq!(pinvar(&["train", "--data", s(&p("missing.csv")), "--basis", "h1", "--wo", "0", "--r", "1", "--out", s(&p("m.json"))]).status.code(), Some(1));
}

const SMALL_SWEEP: &str = r#"{
  "problem": "spring",
  "generation": {"n_points": 800, "scheme": {"exact": {"h": 0.01}}},
  "lookback": 2,
  "train_start": 20,
  "train_len": 100,
  "test_starts": [200, 350, 500],
  "test_len": 100,
  "ridge": [1e-8, 1e-1],
  "ode_weights": [0.0, 1.0]
}"#;

#[test]
fn sweep_report_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(&cfg, SMALL_SWEEP).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["sweep", "--config", s(&cfg), "--out", s(&a), "--jobs", "3"]);
    ok(&["sweep", "--config", s(&cfg), "--out", s(&b), "--jobs", "1"]);
    for f in ["results.csv", "aggregate.csv", "tables.md"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 3 * 2 * 2 * 3);
    assert!(results.starts_with("problem,basis,r,w_o,interval,valid_time,energy,steps_evaluated,diverged_at\n"));
    let agg = fs::read_to_string(a.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 12);
    assert!(a.join("manifest.json").exists());

    // resume: drop the final outputs and half the journal, rerun
    let journal = a.join("results.partial.csv");
    let text = fs::read_to_string(&journal).unwrap();
    let keep: Vec<&str> = text.lines().take(1 + 3 * 5).collect();
    fs::write(&journal, keep.join("\n") + "\n").unwrap();
    fs::remove_file(a.join("aggregate.csv")).unwrap();
    ok(&["sweep", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(fs::read(a.join("aggregate.csv")).unwrap(), fs::read(b.join("aggregate.csv")).unwrap());
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());

    // a different config in the same directory is refused
    fs::write(&cfg, SMALL_SWEEP.replace("\"lookback\": 2", "\"lookback\": 3")).unwrap();
    assert_eq!(pinvar(&["sweep", "--config", s(&cfg), "--out", s(&a)]).status.code(), Some(1));

    let md = ok(&["report", "--results", s(&a), "--format", "markdown"]);
    let md = String::from_utf8(md.stdout).unwrap();
    assert_eq!(md.matches("| r \\ w_o | 0 | 1 |").count(), 6);
    let csv = ok(&["report", "--results", s(&a.join("results.csv")), "--format", "csv"]);
    assert_eq!(csv.stdout, fs::read(b.join("aggregate.csv")).unwrap());
}
