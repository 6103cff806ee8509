use std::path::Path;
use std::process::{Command, Output};

use dkf::bench::parse_report_csv;
use dkf::statespace::TrajectoryDataset;

fn dkf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dkf")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn simulate_fit_run_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&dkf(&["simulate", "--dataset", "syn2", "--T", "400", "--seed", "3", "--out", "syn2.csv"], d));
    let (ds, meta) = TrajectoryDataset::load(&d.join("syn2.csv")).unwrap();
    assert_eq!((ds.len(), ds.observation_dim(), meta.seed), (400, 2, Some(3)));

    let common = ["--dataset", "csv", "--csv-path", "syn2.csv", "--d", "1", "--m", "2", "--trials", "1"];
    let mut fit = vec!["fit", "--filters", "kalman", "--out", "kalman.json"];
    fit.extend(common);
    ok(&dkf(&fit, d));
    let mut run = vec!["run", "--model", "kalman.json", "--out", "trace.csv"];
    run.extend(common);
    ok(&dkf(&run, d));
    let trace = std::fs::read_to_string(d.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,truth_1,mean_1,sd_1\n"));
    assert_eq!(trace.lines().count(), 201);

    std::fs::write(d.join("bench.conf"), "filters = kalman,dkf-gp\ngp-cap = 50\ntrials = 3\n").unwrap();
    let mut bench = vec!["bench", "--config", "bench.conf", "--format", "csv"];
    bench.extend(common);
    let table = parse_report_csv(&ok(&dkf(&bench, d))).unwrap();
    assert_eq!(table.filters, vec!["kalman", "dkf-gp"]);
    assert_eq!(table.trials(), 1, "flag overrides config file");
    assert!(table.values.iter().flatten().all(Option::is_some));
}

#[test]
fn errors_are_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dkf(&["bench", "--dataset", "csv", "--csv-path", "missing.csv", "--m", "2"], dir.path());
    assert!(!out.status.success());
    let line = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["error"], "io");

    let out = dkf(&["bench", "--filters", "kf"], dir.path());
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(v["error"], "invalid_config");
}

#[test]
fn oracle_check_small() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&dkf(&["oracle-check", "--trials", "2", "--T", "10"], dir.path()));
    assert_eq!(text.lines().count(), 3);
}
