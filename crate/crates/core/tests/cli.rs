use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_demandkit"));
    cmd.env_remove("DEMANDKIT_HORIZON_CAP");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_set(dir: &Path, name: &str, triples: &[(&str, &str, &str)]) -> PathBuf {
    let tasks: Vec<Value> = triples.iter().map(|(e, d, p)| serde_json::json!({"e": e, "d": d, "p": p})).collect();
    let path = dir.join(name);
    std::fs::write(&path, serde_json::json!({"version": "1", "tasks": tasks}).to_string()).unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_reports_witness_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let two = write_set(dir.path(), "two.json", &[("1", "1", "1"), ("1", "1", "1")]);
    let out = run(&["analyze", path_str(&two)]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["feasibility"]["status"], "infeasible");
    assert_eq!(v["feasibility"]["witness_t"], "1");

    let ok = write_set(dir.path(), "ok.json", &[("1", "2", "4"), ("1", "3", "4")]);
    let out = run(&["analyze", path_str(&ok)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["rho_ratio"], "3/4");

    let csv = run(&["analyze", path_str(&ok), "--csv"]);
    assert_eq!(String::from_utf8(csv.stdout).unwrap(), "status,witness_t,horizon,rho_ratio,utilization\nfeasible,,3,3/4,1/2\n");

    let plot = String::from_utf8(run(&["analyze", path_str(&ok), "--plot-data"]).stdout).unwrap();
    assert!(plot.starts_with("series,x,y\n"));
    assert!(plot.contains("dbf,3,2\n"));
}

#[test]
fn horizon_cap_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_set(dir.path(), "ok.json", &[("1", "2", "4"), ("1", "3", "4")]);
    let out = bin().args(["analyze", path_str(&ok)]).env("DEMANDKIT_HORIZON_CAP", "1").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["feasibility"]["status"], "horizon_overflow");
}

#[test]
fn rho_brute_and_friends() {
    let out = run(&["rho", "--brute", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["best_value"], "4/3");

    let csv = String::from_utf8(run(&["rho", "--brute", "3", "--upto", "--csv"]).stdout).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "n,best_value_num,best_value_den,best_value_float,margin_14_9");
    assert!(lines[2].starts_with("2,5,4,"));

    assert_eq!(run(&["rho", "--brute", "11"]).status.code(), Some(2));
    assert_eq!(run(&["rho", "--cauchy", "20"]).status.code(), Some(0));

    let a = run(&["rho", "--probe", "--samples", "50", "--seed", "5"]);
    let b = run(&["rho", "--probe", "--samples", "50", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn partition_fail_and_success() {
    let dir = tempfile::tempdir().unwrap();
    let two = write_set(dir.path(), "two.json", &[("1", "1", "1"), ("1", "1", "1")]);
    let out = run(&["partition", path_str(&two), "-m", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out), serde_json::json!({"result": "fail", "task": 2}));

    let out = run(&["partition", path_str(&two), "-m", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["assignment"], serde_json::json!([1, 2]));

    let out = run(&["minspeed", path_str(&two), "-m", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let speed: f64 = json(&out)["min_speed_float"].as_f64().unwrap();
    assert!((2.0..=2.0 + 1e-6).contains(&speed));

    assert_eq!(run(&["partition", path_str(&two), "-m", "0"]).status.code(), Some(2));
}

#[test]
fn transform_pipeline_dumps_stages() {
    let dir = tempfile::tempdir().unwrap();
    let ts = write_set(dir.path(), "ts.json", &[("1", "1", "2"), ("1", "3", "3")]);
    let dump = dir.path().join("stages");
    let out = run(&["transform", path_str(&ts), "--pipeline", "--dump-dir", path_str(&dump)]);
    assert_eq!(out.status.code(), Some(0));
    let steps = json(&out)["steps"].as_array().unwrap().clone();
    let names: Vec<_> = steps.iter().map(|s| s["name"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["normalize_chen", "tighten_deadlines", "split_equal_execution", "align"]);
    assert!(dump.join("00_input.json").exists() && dump.join("04_align.json").exists());

    let infeasible = write_set(dir.path(), "bad.json", &[("1", "1", "1"), ("1", "1", "1")]);
    let out = run(&["transform", path_str(&infeasible), "--pipeline"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["error"].as_str().unwrap().starts_with("normalize_chen: precondition"));

    let out = run(&["transform", path_str(&ts), "--step", "tighten", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("1,tighten_deadlines,"));

    assert_eq!(run(&["transform", path_str(&ts)]).status.code(), Some(2));
}

#[test]
fn simulate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let ts = write_set(dir.path(), "ts.json", &[("1", "2", "4")]);
    let out = run(&["simulate", path_str(&ts), "--horizon", "2", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "time,event,task\n0,release,0\n1,completion,0\n");

    let two = write_set(dir.path(), "two.json", &[("1", "1", "1"), ("1", "1", "1")]);
    let out = run(&["simulate", path_str(&two)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["trace"]["outcome"]["result"], "miss");
}

#[test]
fn gen_is_deterministic_and_forced_case_is_exact() {
    let a = run(&["gen", "-n", "5", "--seed", "17"]);
    let b = run(&["gen", "-n", "5", "--seed", "17"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let forced = run(&["gen", "-n", "1", "-u", "1", "--period-min", "1", "--period-max", "1"]);
    let tasks = json(&forced)["tasks"].clone();
    assert_eq!(tasks, serde_json::json!([{"e": "1", "d": "1", "p": "1"}]));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    assert_eq!(run(&["gen", "-n", "4", "-o", path_str(&path)]).status.code(), Some(0));
    assert_eq!(run(&["analyze", path_str(&path)]).status.code(), Some(0));
}

#[test]
fn speedup_rows() {
    let out = run(&["speedup", "--m", "2,3", "--count", "4", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("taskset_id,m,min_speed,bound,margin"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn usage_and_io_errors_exit_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["analyze"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "/nonexistent/set.json"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "not json").unwrap();
    let out = run(&["analyze", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}
