use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn segsel(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_segsel"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    if let Some(s) = stdin {
        child.stdin.take().unwrap().write_all(s.as_bytes()).unwrap();
    }
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn data() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/cgh_like.csv").display().to_string()
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(name)
}

#[test]
fn four_points_one_step() {
    let out = segsel(&["detect", "--input", "-", "--algo", "bs", "--steps", "1"], Some("value\n0\n0\n1\n1\n"));
    let r = json(&out);
    assert_eq!(r["model"]["b"], serde_json::json!([2]));
    assert_eq!(r["model"]["d"].as_array().unwrap().len(), 1);
    assert_eq!(r["n"], 4);
}

#[test]
fn precut_splits_at_chromosomes() {
    let csv = "chrom,pos,value\n1,1,0\n1,2,0.1\n1,3,0\n2,1,3\n2,2,3.1\n2,3,2.9\n2,4,3\n";
    let r = json(&segsel(&["detect", "--input", "-", "--steps", "1", "--precut"], Some(csv)));
    assert_eq!(r["model"]["initial_cuts"], serde_json::json!([3]));
    assert_ne!(r["model"]["b"][0], 3);
}

#[test]
fn wbs_inference_is_reproducible() {
    let args = ["infer", "--input", &data(), "--algo", "wbs", "--steps", "4", "--B", "2000", "--seed", "7", "--sigma", "0.12"];
    let a = segsel(&args, None);
    let b = segsel(&args, None);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["tests"].as_array().unwrap().len(), 4);
    for t in r["tests"].as_array().unwrap() {
        let p = t["result"]["pvalue"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn selected_model_runs_without_sigma() {
    let out = segsel(
        &["infer", "--input", &data(), "--steps", "1", "--test", "sel", "--samples", "300", "--seed", "3"],
        None,
    );
    let r = json(&out);
    let p = r["tests"][0]["result"]["pvalue"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn invalid_combinations_exit_3() {
    for args in [
        vec!["detect", "--input", "-", "--stop", "ic", "--algo", "wbs"],
        vec!["infer", "--input", "-", "--test", "sel", "--marginalize", "noise"],
        vec!["detect", "--input", "-", "--no-such-flag"],
    ] {
        let out = segsel(&args, Some("value\n0\n1\n0\n1\n0\n1\n"));
        assert_eq!(out.status.code(), Some(3), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn malformed_input_exits_2() {
    for csv in ["value\n0\nabc\n1\n", "x\n1\n2\n", "chrom,value\n1,0\n1,2,3\n"] {
        let out = segsel(&["detect", "--input", "-"], Some(csv));
        assert_eq!(out.status.code(), Some(2), "{csv:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
    }
}

#[test]
fn gamma_dump_has_one_row_per_halfspace() {
    let path = tmp("gamma.csv");
    let out = segsel(
        &["gamma", "--input", "-", "--steps", "1", "--out", path.to_str().unwrap()],
        Some("value\n0\n0.2\n1\n1.1\n0.9\n"),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    // one step of BS on n = 5 has 2 (n - 2) rows
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(text.lines().next().unwrap().ends_with("g5"));
}

fn simulate(extra: &[&str]) -> String {
    let path = tmp(&format!("sim-{}.csv", extra.join("_").replace([',', '.'], "")));
    let mut args = vec!["simulate", "--trials", "40", "--seed", "11", "--out", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = segsel(&args, None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn simulation_csv_is_deterministic() {
    let a = simulate(&["--method", "bs-sat,fl-sat", "--deltas", "0,2"]);
    let b = simulate(&["--method", "bs-sat,fl-sat", "--deltas", "0,2"]);
    assert_eq!(a, b);
    assert!(a.starts_with("schema_version,scenario,delta,method,metric,value,stderr,trials,seed"));
    assert!(a.lines().any(|l| l.contains(",fl-sat,conditional_power,")));
}

#[test]
fn marginalized_wbs_detection_grows_with_the_jump() {
    let text = simulate(&["--method", "wbs-sat-marg", "--deltas", "1,2,3,4", "--mc-trials", "20", "--B", "60"]);
    let det: Vec<f64> = text
        .lines()
        .filter(|l| l.contains(",detection,"))
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert_eq!(det.len(), 4);
    assert!(det.windows(2).all(|w| w[1] >= w[0] - 0.05), "{det:?}");
    assert!(det[3] > det[0]);
}
