use std::fs;
use std::path::Path;
use std::process::Command;

use garding_eigen::cli::dispatch;
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("garding-eigen").chain(args.iter().copied()))
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.ini");
    fs::write(&path, format!("{body}\noutput = {}\n", dir.join("out").display())).unwrap();
    path.display().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["verify", "--operator", "k-hessian:k=3,n=2"]), 2);
    assert_eq!(run(&["eigen", "--config", "/nonexistent/run.ini"]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_garding-eigen");
    assert_eq!(Command::new(bin).arg("nope").output().unwrap().status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(bin)
        .args(["falsify-quotient", "--n", "2", "--k", "2", "--l", "1", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\noperator = k-hessian:k=1,n=2\ndomain = unit-square\nh = -0.5");
    assert_eq!(run(&["solve", "--config", &cfg]), 2);
}

#[test]
fn falsify_quotient_reports_small_product() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    assert_eq!(run(&["falsify-quotient", "--n", "2", "--k", "2", "--l", "1", "--output", &out]), 0);
    let r = report(dir.path());
    let product = 1e-3 - r["result"]["worst_margin"].as_f64().unwrap();
    assert!(product < 1e-3);
    assert_eq!(run(&["falsify-quotient", "--n", "2", "--k", "1", "--l", "1", "--output", &out]), 2);
}

#[test]
fn verify_and_oracle_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    assert_eq!(run(&["verify", "--operator", "p-ma:p=2,n=3", "--samples", "500", "--output", &out]), 0);
    assert_eq!(report(dir.path())["pass"], Value::Bool(true));
    assert_eq!(
        run(&["oracle", "--operator", "k-hessian:k=1,n=2", "--radius", "1", "--mesh", "2000", "--output", &out]),
        0
    );
    let l = report(dir.path())["result"]["lambda1"].as_f64().unwrap();
    let exact = garding_eigen::radial::BESSEL_J01.powi(2) / 2.0;
    assert!((l - exact).abs() < 1e-6 * exact);
}

#[test]
fn solve_writes_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\noperator = k-hessian:k=2,n=2\ndomain = unit-disk\nh = 0.0625");
    assert_eq!(run(&["solve", "--config", &cfg, "--lambda", "1.0"]), 0);
    let csv = fs::read_to_string(dir.path().join("out/field.csv")).unwrap();
    assert!(csv.starts_with("x,y,value\n"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn eigen_on_square_is_deterministic_and_embeds_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_config(dir.path(), "[run]\noperator = k-hessian:k=1,n=2\ndomain = unit-square\nh = 0.03125\nseed = 7");
    let out = dir.path().join("out");
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("metadata");
        serde_json::to_string_pretty(&v).unwrap()
    };

    assert_eq!(run(&["eigen", "--config", &cfg]), 0);
    let first = report(&out);
    let (field, trace) = (fs::read(out.join("field.csv")).unwrap(), fs::read(out.join("trace.csv")).unwrap());
    assert_eq!(run(&["eigen", "--config", &cfg]), 0);
    let second = report(&out);
    assert_eq!(fs::read(out.join("field.csv")).unwrap(), field);
    assert_eq!(fs::read(out.join("trace.csv")).unwrap(), trace);

    let l = first["result"]["lambda1"].as_f64().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((l - pi2).abs() <= 0.01 * pi2);
    assert_eq!(first["result"]["config"]["seed"], 7);
    assert_eq!(first["result"]["config"]["h"], 0.03125);
    assert!(first["metadata"]["wall_time_ms"].is_u64());
    assert_eq!(strip(first), strip(second));
}
