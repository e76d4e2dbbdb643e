use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(format!("{name}.json"))
}

fn daycare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daycare")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_reports_witness() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(&m, r#"{"assignment": {"c1": "d2", "c2": "d0"}}"#).unwrap();
    let inst = fixture("seat_transfer");
    let out = stdout(&daycare(&["check", "--instance", path(&inst), "--matching", path(&m), "--mode", "ours"]));
    let (head, body) = out.split_once('\n').unwrap();
    assert_eq!(head, "UNSTABLE");
    let v: Value = serde_json::from_str(body).unwrap();
    assert_eq!(v["family"], "f");
    assert_eq!(v["tuple"], serde_json::json!(["d1", "d2"]));
    let out = stdout(&daycare(&["check", "--instance", path(&inst), "--matching", path(&m), "--mode", "abh"]));
    assert_eq!(out.trim(), "STABLE");
}

#[test]
fn solve_writes_trace_and_inspect_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let inst = fixture("esda_reorders");
    let out = stdout(&daycare(&["solve", "--instance", path(&inst), "--algo", "esda", "--trace", path(&trace)]));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "success");
    assert_eq!(v["permutations"].as_array().unwrap().len(), 3);
    let lines = std::fs::read_to_string(&trace).unwrap();
    for l in lines.lines() {
        let e: Value = serde_json::from_str(l).unwrap();
        assert!(e["event"].is_string());
    }
    let report: Value =
        serde_json::from_str(&stdout(&daycare(&["inspect", "--instance", path(&inst), "--trace", path(&trace)]))).unwrap();
    assert_eq!(report["run"]["status"], "success");
    assert_eq!(report["run"]["checks"]["permutations_unique"], true);
}

#[test]
fn exists_matches_worked_examples() {
    let run = |name: &str, mode: &str| -> Value {
        serde_json::from_str(&stdout(&daycare(&["exists", "--instance", path(&fixture(name)), "--mode", mode]))).unwrap()
    };
    assert_eq!(run("three_pairs", "ours")["result"], "none");
    assert_eq!(run("abh_gap", "ours")["result"], "none");
    assert_eq!(run("abh_gap", "abh")["result"], "found");
    let v = run("child_cycle", "ours");
    assert_eq!(v["matching"]["assignment"]["c3"], "d2");
    assert_eq!(v["matching"]["assignment"]["c4"], "d1");
    let v: Value = serde_json::from_str(&stdout(&daycare(&[
        "exists",
        "--instance",
        path(&fixture("three_pairs")),
        "--max-nodes",
        "1",
    ])))
    .unwrap();
    assert_eq!(v["result"], "budget_exceeded");
}

#[test]
fn gen_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let args = ["gen", "--n", "60", "--alpha", "0.2", "--phi", "0.5", "--sigma", "2", "--epsilon", "1", "--seed", "7"];
        let mut args: Vec<&str> = args.to_vec();
        args.extend(["--out", path(p)]);
        stdout(&daycare(&args));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: Value = serde_json::from_slice(&ta).unwrap();
    assert!(v["meta"]["reference_ordering"].is_array());
    assert!(v["meta"]["grouped"].is_object());
    assert!(v["meta"]["ages"].is_object());
    let report: Value = serde_json::from_str(&stdout(&daycare(&["inspect", "--instance", path(&a)]))).unwrap();
    assert!(report["diameters"].is_object());
}

#[test]
fn experiment_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"sizes": [60], "phis": [0.5, 1.0], "trials": 5, "algorithms": ["sc", "sda", "esda"], "seed": 3}"#,
    )
    .unwrap();
    let mut csvs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        stdout(&daycare(&["experiment", "--spec", path(&spec), "--out", path(&out)]));
        let text = std::fs::read_to_string(&out).unwrap();
        let rows: Vec<String> = text
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                [&f[..5], &f[7..]].concat().join(",")
            })
            .collect();
        csvs.push(rows);
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0].len(), 1 + 2 * 3);
    let md = stdout(&daycare(&["experiment", "--spec", path(&spec), "--format", "markdown"]));
    assert!(md.starts_with("| #children | Algorithm |"));
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"sizes": [60], "phis": [2.0], "algorithms": ["esda"]}"#).unwrap();
    let o = daycare(&["experiment", "--spec", path(&spec)]);
    assert!(!o.status.success());
    std::fs::write(&spec, r#"{"sizes": [60], "phis": [0.5], "algorithms": ["esda"], "trails": 3}"#).unwrap();
    let o = daycare(&["experiment", "--spec", path(&spec)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("trails"));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"families": [], "daycares": []}"#).unwrap();
    let o = daycare(&["solve", "--instance", path(&bad)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("d0"));
}
