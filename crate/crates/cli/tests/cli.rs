use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn arcforge(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_arcforge"))
        .args(args)
        .output()
        .expect("binary runs");
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().expect("exit code"), report)
}

fn file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const MEASURE: &str = r#"{"points": [[0.0, 0.0], [1.0, 0.5], [2.0, 1.0], [3.0, 0.2], [4.0, 0.1], [0.5, 3.0]],
 "weights": [0.2, 0.2, 0.2, 0.2, 0.1, 0.1]}"#;
const ARC: &str = r#"{"m": 3, "scales": [0.5, 2.0, 1.0]}"#;
const CLIP: &str = r#"{"d": 1, "layers": [{"W": [[1.0]], "b": [0.0]}, {"W": [[-1.0]], "b": [1.0]}, {"W": [[-1.0]], "b": [1.0]}]}"#;

#[test]
fn verify_pipeline_fixture() {
    let dir = TempDir::new().unwrap();
    let (mu, arc) = (file(&dir, "mu.json", MEASURE), file(&dir, "arc.json", ARC));
    let net = dir.path().join("net.json");
    let (code, synth) = arcforge(&[
        "synth",
        "--measure",
        s(&mu),
        "--arc",
        s(&arc),
        "--out",
        s(&net),
    ]);
    assert_eq!(code, 0);
    assert!(synth["outputs"]["delta"].as_f64().unwrap() > 0.0);

    let (code, report) = arcforge(&[
        "verify",
        "--measure",
        s(&mu),
        "--arc",
        s(&arc),
        "--net",
        s(&net),
    ]);
    assert_eq!(code, 0);
    assert_eq!(report["pass"], Value::Bool(true));
    assert!(report["outputs"]["scale_error"].as_f64().unwrap() < 1e-9);
}

#[test]
fn prokhorov_identical_files() {
    let dir = TempDir::new().unwrap();
    let mu = file(&dir, "mu.json", MEASURE);
    let (code, report) = arcforge(&["prokhorov", "--mu", s(&mu), "--nu", s(&mu)]);
    assert_eq!(code, 0);
    assert_eq!(report["outputs"]["d_p"].as_f64(), Some(0.0));
}

#[test]
fn canon_clip_network() {
    let dir = TempDir::new().unwrap();
    let net = file(&dir, "clip.json", CLIP);
    let (code, report) = arcforge(&["canon", "--net", s(&net), "--verify-grid", "500"]);
    assert_eq!(code, 0);
    let form = &report["outputs"]["form"];
    assert_eq!(form["form"], "BoundedRamp");
    for (key, want) in [("c1", 0.0), ("c2", 1.0), ("a1", 0.0), ("a2", 1.0)] {
        assert_eq!(form[key].as_f64(), Some(want), "{key}");
    }
}

#[test]
fn wrong_network_fails_verification() {
    let dir = TempDir::new().unwrap();
    let (mu, arc) = (file(&dir, "mu.json", MEASURE), file(&dir, "arc.json", ARC));
    let id = file(
        &dir,
        "id.json",
        r#"{"d": 2, "layers": [{"W": [[1.0, 0.0], [0.0, 1.0]], "b": [0.0, 0.0]}]}"#,
    );
    let (code, report) = arcforge(&[
        "verify",
        "--measure",
        s(&mu),
        "--arc",
        s(&arc),
        "--net",
        s(&id),
    ]);
    assert_eq!(code, 1);
    assert_eq!(report["pass"], Value::Bool(false));
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let mu = file(&dir, "mu.json", MEASURE);
    let broken = file(
        &dir,
        "broken.json",
        r#"{"points": [[0.0]], "weights": [0.5]}"#,
    );
    let garbage = file(&dir, "garbage.json", "not json");
    assert_eq!(
        arcforge(&["prokhorov", "--mu", s(&mu), "--nu", s(&broken)]).0,
        2
    );
    assert_eq!(
        arcforge(&["prokhorov", "--mu", s(&mu), "--nu", s(&garbage)]).0,
        2
    );
    assert_eq!(
        arcforge(&["prokhorov", "--mu", s(&mu), "--nu", "/nonexistent.json"]).0,
        2
    );
    let bad_arc = file(&dir, "arc.json", r#"{"m": 2, "scales": [1.0, 0.5]}"#);
    assert_eq!(
        arcforge(&["verify", "--measure", s(&mu), "--arc", s(&bad_arc)]).0,
        2
    );
}

#[test]
fn lipschitz_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("rows.csv");
    let args = [
        "lipschitz",
        "--seed",
        "9",
        "--pairs",
        "40",
        "--arcs",
        "60",
        "--csv",
        s(&csv),
    ];
    let (code, first) = arcforge(&args);
    assert_eq!(code, 0);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert!(rows.starts_with("kind,m,d_p,d_ca,bound,scale_diff\n"));
    assert_eq!(rows.lines().filter(|l| l.starts_with("scale,")).count(), 60);
    assert_eq!(arcforge(&args).1, first);
    let (_, other) = arcforge(&["lipschitz", "--seed", "10", "--pairs", "40", "--arcs", "60"]);
    assert_ne!(other["inputs_digest"], first["inputs_digest"]);
}

#[test]
fn walk_invariance_report() {
    let dir = TempDir::new().unwrap();
    let mu = file(&dir, "mu.json", MEASURE);
    let f0 = file(
        &dir,
        "f0.json",
        r#"{"d": 2, "layers": [{"W": [[0.0, 1.0], [1.0, 0.0]], "b": [0.0, 0.0]}]}"#,
    );
    let f1 = file(
        &dir,
        "f1.json",
        r#"{"d": 2, "layers": [{"W": [[0.5, 0.0], [0.0, 0.5]], "b": [0.1, 0.0]}]}"#,
    );
    let (code, report) = arcforge(&[
        "walk",
        "--t",
        "5.25",
        "--nets",
        s(&f0),
        s(&f1),
        "--measure",
        s(&mu),
    ]);
    assert_eq!(code, 0);
    assert_eq!(report["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn gamma_below_two_is_empty() {
    let (code, report) = arcforge(&["gamma", "--t", "1.5"]);
    assert_eq!(code, 0);
    assert_eq!(report["outputs"]["sequence"], Value::Array(vec![]));
    let (_, report) = arcforge(&["gamma", "--t", "3.7", "--depth", "8"]);
    assert_eq!(report["outputs"]["sequence"].as_array().unwrap().len(), 3);
}

#[test]
fn synth_stage_dump() {
    let dir = TempDir::new().unwrap();
    let (mu, arc) = (file(&dir, "mu.json", MEASURE), file(&dir, "arc.json", ARC));
    let csv = dir.path().join("stages.csv");
    let (code, report) = arcforge(&[
        "synth",
        "--measure",
        s(&mu),
        "--arc",
        s(&arc),
        "--csv",
        s(&csv),
    ]);
    assert_eq!(code, 0);
    assert!(report["outputs"]["network"]["layers"].is_array());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("stage,index,x,y,weight\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("arc,")).count(), 4);
    assert!(text.lines().any(|l| l.starts_with("bend")));
}
