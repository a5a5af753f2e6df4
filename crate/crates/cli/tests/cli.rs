use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn munsc(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_munsc"));
    cmd.args(args).env_remove("MUNSC_SEED");
    if let Some(s) = seed {
        cmd.env("MUNSC_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_run_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("mix.csv");
    let report = dir.path().join("report.json");
    let rows = dir.path().join("rows.csv");
    ok(&munsc(&["gen", "--n", "240", "--k-true", "2", "--outliers", "0.02", "--seed", "3", "--out", s(&data)], None));
    ok(&munsc(
        &["run", "--data", s(&data), "--k", "2", "--delta", "0.2", "--perm-seed", "5", "--dataset-seed", "3", "--out", s(&report)],
        None,
    ));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["n"], 240);
    assert_eq!(json["decisions_logged"], 240);
    assert_eq!(json["stream_violations"], 0);
    assert_eq!(json["oracle"]["exact"], true);
    assert_eq!(json["config"]["perm_seed"], 5);
    assert!(json["ratio"].as_f64().unwrap() <= json["ratio_ceiling"].as_f64().unwrap());

    ok(&munsc(&["report", s(&report), "--out", s(&rows)], None));
    let csv = std::fs::read_to_string(&rows).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("file,n,k,delta,profile,solver"));
    assert!(lines[1].contains(",240,2,0.2,desk,local-search,5,"));
}

#[test]
fn seed_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..3).map(|i| dir.path().join(format!("{i}.csv"))).collect();
    for (p, seed) in paths.iter().zip(["11", "11", "12"]) {
        ok(&munsc(&["gen", "--n", "50", "--k-true", "2", "--out", s(p)], Some(seed)));
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&paths[0]), read(&paths[1]));
    assert_ne!(read(&paths[0]), read(&paths[2]));
}

#[test]
fn bench_writes_one_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    ok(&munsc(&["bench", "--suite", "ratio", "--trials", "3", "--jobs", "2", "--n", "120", "--out", s(&out)], Some("4")));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("ratio,k=2,") && l.ends_with(",true")));
}

#[test]
fn bad_input_fails_cleanly() {
    let out = munsc(&["run", "--data", "/nonexistent.csv", "--k", "2", "--delta", "0.2"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    let out = munsc(&["bench", "--suite", "nope", "--out", "x.csv"], None);
    assert!(!out.status.success());
}
