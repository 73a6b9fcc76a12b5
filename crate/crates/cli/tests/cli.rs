use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn arbor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arbor"))
        .args(args)
        .env_remove("ARBOR_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = arbor(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// A random model plus rows labelled with its predictions.
fn model_and_data(dir: &TempDir, features: usize) -> (String, String) {
    let model = path(dir.path(), "model.json");
    let data = path(dir.path(), "data.csv");
    let (m, d) = (model.to_str().unwrap(), data.to_str().unwrap());
    let f = features.to_string();
    ok(&["gen", "model", "--trees", "6", "--features", &f, "--depth", "3", "--seed", "4", "-o", m]);
    ok(&["gen", "data", "--rows", "25", "--features", &f, "-m", m, "--seed", "5", "-o", d]);
    (m.to_string(), d.to_string())
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn explanations_sum_to_predictions() {
    let dir = TempDir::new().unwrap();
    let (m, d) = model_and_data(&dir, 5);
    let predictions = rows(&ok(&["predict", "-m", &m, "-d", &d, "--label", "label"]));
    for method in ["treeshap", "brute", "saabas"] {
        let explained = rows(&ok(&["explain", "--method", method, "-m", &m, "-d", &d, "--label", "label"]));
        assert_eq!(explained.len(), 25);
        for (e, p) in explained.iter().zip(&predictions) {
            let total: f64 = e[1..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
            let margin: f64 = p[1].parse().unwrap();
            assert!((total - margin).abs() < 1e-8, "{method}: {total} vs {margin}");
        }
    }
}

#[test]
fn brute_force_refuses_twenty_features() {
    let dir = TempDir::new().unwrap();
    let (m, d) = model_and_data(&dir, 20);
    let out = arbor(&["explain", "--method", "brute", "-m", &m, "-d", &d, "--label", "label"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn exit_codes_separate_usage_and_input_errors() {
    assert_eq!(arbor(&["explain", "--method", "nonsense"]).status.code(), Some(1));
    assert_eq!(arbor(&["frobnicate"]).status.code(), Some(1));
    let out = arbor(&["explain", "-m", "/nonexistent/model.json", "-d", "/nonexistent/data.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.json"));
}

#[test]
fn column_mismatch_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let (m, _) = model_and_data(&dir, 5);
    let narrow = path(dir.path(), "narrow.csv");
    std::fs::write(&narrow, "a,b\n0.1,0.2\n").unwrap();
    let out = arbor(&["explain", "-m", &m, "-d", narrow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (m, d) = model_and_data(&dir, 6);
    let args = ["explain", "--method", "sampling", "--budget", "500", "-m", &m, "-d", &d, "--label", "label", "--seed", "11"];
    let a = arbor(&args);
    let b = arbor(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let from_env = Command::new(env!("CARGO_BIN_EXE_arbor"))
        .args(&args[..args.len() - 2])
        .env("ARBOR_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(from_env.stdout, a.stdout);
    let other = arbor(&[&args[..args.len() - 1], &["12"]].concat());
    assert_ne!(other.stdout, a.stdout);
}

#[test]
fn json_output_is_an_array_of_records() {
    let dir = TempDir::new().unwrap();
    let (m, d) = model_and_data(&dir, 3);
    let text = ok(&["explain", "-m", &m, "-d", &d, "--label", "label", "--json"]);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let records = value.as_array().unwrap();
    assert_eq!(records.len(), 25);
    let keys: Vec<&str> = records[0].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["sample", "base", "f0", "f1", "f2"]);
}

#[test]
fn user_study_exact_methods_agree() {
    let text = ok(&["bench", "--suite", "user-study"]);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let body: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(body.len(), 12);
    for exact in ["treeshap", "brute", "indep", "kernel"] {
        let col = header.iter().position(|h| *h == exact).unwrap();
        assert!(body.iter().all(|r| r[col] == "0"), "{exact}");
    }
    let saabas = header.iter().position(|h| *h == "saabas").unwrap();
    let and_ttt = body.iter().find(|r| r[0] == "AND/TTT").unwrap();
    assert!(and_ttt[saabas].parse::<f64>().unwrap() > 1.0);
}

#[test]
fn and_fixture_splits_credit_evenly() {
    let dir = TempDir::new().unwrap();
    let model = path(dir.path(), "and.json");
    let data = path(dir.path(), "x.csv");
    ok(&["gen", "fixture", "--name", "and", "-o", model.to_str().unwrap()]);
    std::fs::write(&data, "fever,cough\n1,1\n").unwrap();
    let (m, d) = (model.to_str().unwrap(), data.to_str().unwrap());
    assert_eq!(rows(&ok(&["explain", "-m", m, "-d", d]))[0], ["0", "20", "30", "30"].map(String::from));
    let pairs = rows(&ok(&["interactions", "-m", m, "-d", d]));
    let off: Vec<&Vec<String>> = pairs.iter().filter(|r| r[1] == "fever" && r[2] == "cough").collect();
    assert_eq!(off[0][3], "10");
}

#[test]
fn analysis_commands_run() {
    let dir = TempDir::new().unwrap();
    let (m, d) = model_and_data(&dir, 4);
    let base = ["-m", m.as_str(), "-d", d.as_str(), "--label", "label"];
    let summary = ok(&[&["summarize"][..], &base].concat());
    assert_eq!(summary.lines().count(), 5);
    assert_eq!(ok(&[&["pca", "-k", "2"][..], &base].concat()).lines().count(), 26);
    assert_eq!(ok(&[&["cluster", "--order"][..], &base].concat()).lines().count(), 26);
    assert_eq!(ok(&[&["dependence", "--feature", "f1"][..], &base].concat()).lines().count(), 26);
    let monitor = ok(&[&["monitor", "--window", "5", "--references", "10"][..], &base].concat());
    assert!(monitor.lines().count() > 1);
}

#[test]
fn labelled_background_file_is_accepted() {
    let dir = TempDir::new().unwrap();
    let (m, d) = model_and_data(&dir, 4);
    let out = ok(&["explain", "--method", "indep", "-b", &d, "--references", "10", "-m", &m, "-d", &d, "--label", "label"]);
    assert_eq!(rows(&out).len(), 25);
}
