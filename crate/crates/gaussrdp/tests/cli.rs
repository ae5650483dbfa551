use std::process::{Command, Output};

use gaussrdp::format::sweep_from_csv;
use gaussrdp_core::model::SweepOutcome;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaussrdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn symmetric_rd_point() {
    let v = json(&["point", "--lambdas", "1,1", "--metric", "none", "--distortion", "1"]);
    assert!((f(&v["rate_nats"]) - std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(v["case_tag"], "distortion_only");
    assert_eq!(v["lambda"].as_array().unwrap().len(), 2);
}

#[test]
fn w2_perfect_perception_point() {
    let v = json(&[
        "point",
        "--lambdas",
        "1",
        "--metric",
        "w2",
        "--distortion",
        "1",
        "--perception",
        "0",
    ]);
    assert!((f(&v["rate_nats"]) - 0.143841).abs() < 1e-6);
    assert!((f(&v["gamma"][0]) - 0.75).abs() < 1e-9);
    assert_eq!(v["dual"]["nu2"], Value::Null);
}

#[test]
fn huge_kl_budget_matches_rd() {
    let kl = json(&[
        "point",
        "--lambdas",
        "1",
        "--metric",
        "kl",
        "--distortion",
        "0.5",
        "--perception",
        "1e9",
    ]);
    let rd = json(&["point", "--lambdas", "1", "--metric", "none", "--distortion", "0.5"]);
    assert!((f(&kl["rate_nats"]) - f(&rd["rate_nats"])).abs() <= 1e-9);
}

#[test]
fn bits_are_nats_over_ln2() {
    let v = json(&[
        "point",
        "--lambdas",
        "1,1",
        "--metric",
        "none",
        "--distortion",
        "1",
        "--rate-unit",
        "bits",
    ]);
    assert!((f(&v["rate_bits"]) - 1.0).abs() < 1e-12);
    assert!(v.get("rate_nats").is_none());
}

#[test]
fn covariance_file_matches_inline_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cov.txt");
    // eigenvalues 3 and 1, rotated by 45 degrees, plus an independent 0.5
    std::fs::write(&path, "3\n2 1 0\n1 2 0\n0 0 0.5\n").unwrap();
    let p = path.to_str().unwrap();
    let a = json(&[
        "point",
        "--covariance",
        p,
        "--metric",
        "kl",
        "--distortion",
        "1.5",
        "--perception",
        "0.1",
    ]);
    let b = json(&[
        "point",
        "--lambdas",
        "3,1,0.5",
        "--metric",
        "kl",
        "--distortion",
        "1.5",
        "--perception",
        "0.1",
    ]);
    assert!((f(&a["rate_nats"]) - f(&b["rate_nats"])).abs() <= 1e-10);
    for key in ["gamma", "lambda_hat"] {
        for (x, y) in a[key].as_array().unwrap().iter().zip(b[key].as_array().unwrap()) {
            assert!((f(x) - f(y)).abs() <= 1e-10);
        }
    }
    assert!(a["metadata"]["source"].as_str().unwrap().starts_with("covariance="));
}

#[test]
fn curve_is_identical_across_job_counts() {
    let base = [
        "curve",
        "--lambdas",
        "3,2,5,4,1",
        "--metric",
        "w2",
        "--distortion",
        "0.5:25:6:log",
        "--perception",
        "0:2:5",
    ];
    let one = stdout(&[&base[..], &["--jobs", "1"]].concat());
    let four = stdout(&[&base[..], &["--jobs", "4"]].concat());
    assert_eq!(one, four);
    assert_eq!(one.lines().count(), 3 + 1 + 30);
}

#[test]
fn one_point_curve_is_point_output() {
    let point = stdout(&[
        "point",
        "--lambdas",
        "2,0.5",
        "--metric",
        "kl",
        "--distortion",
        "1.2",
        "--perception",
        "0.05",
        "--format",
        "csv",
    ]);
    let curve = stdout(&[
        "curve",
        "--lambdas",
        "2,0.5",
        "--metric",
        "kl",
        "--distortion",
        "1.2:1.2:1",
        "--perception",
        "0.05",
    ]);
    assert_eq!(point, curve);
}

#[test]
fn curve_csv_round_trips_and_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run(&[
        "curve",
        "--lambdas",
        "3,2,5,4,1",
        "--metric",
        "kl",
        "--distortion",
        "1:30:5",
        "--perception",
        "0.2",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success() && out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let sweep = sweep_from_csv(&text).unwrap();
    assert_eq!(sweep.queries.len(), 5);
    assert_eq!(gaussrdp::format::sweep_to_csv(&sweep, 5).unwrap(), text);
    // D = 30 exceeds the zero-rate threshold
    assert!(matches!(sweep.solutions[4], SweepOutcome::Solved { total_rate, .. } if total_rate == 0.0));
}

#[test]
fn curve_json_mirrors_csv() {
    let v = json(&[
        "curve",
        "--lambdas",
        "2,1",
        "--metric",
        "w2",
        "--distortion",
        "0.5:2:3",
        "--perception",
        "0.1",
        "--format",
        "json",
    ]);
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    assert_eq!(points[0]["gamma"].as_array().unwrap().len(), 2);
}

// components are listed in descending eigenvalue order
fn gammas(csv: &str) -> Vec<f64> {
    let row = csv.lines().nth(4).unwrap();
    row.split(',').skip(5).take(5).map(|x| x.parse().unwrap()).collect()
}

#[test]
fn water_levels_near_full_variance() {
    let csv = stdout(&[
        "point",
        "--lambdas",
        "3,2,5,4,1",
        "--metric",
        "none",
        "--distortion",
        "14.99",
        "--format",
        "csv",
    ]);
    let lambdas = [5.0, 4.0, 3.0, 2.0, 1.0];
    let below: Vec<usize> = gammas(&csv)
        .iter()
        .zip(lambdas)
        .enumerate()
        .filter(|(_, (g, l))| **g < *l)
        .map(|(i, _)| i)
        .collect();
    assert_eq!(below, vec![0]);
}

#[test]
fn perfect_perception_near_zero_rate_uses_every_component() {
    let csv = stdout(&[
        "point",
        "--lambdas",
        "3,2,5,4,1",
        "--metric",
        "kl",
        "--distortion",
        "29.9",
        "--perception",
        "0",
        "--format",
        "csv",
    ]);
    let lambdas = [5.0, 4.0, 3.0, 2.0, 1.0];
    assert!(gammas(&csv).iter().zip(lambdas).all(|(g, l)| *g < l));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(
        code(&["point", "--lambdas", "1,x", "--metric", "none", "--distortion", "1"]),
        1
    );
    assert_eq!(
        code(&["point", "--lambdas", "1", "--metric", "kl", "--distortion", "1"]),
        1
    );
    assert_eq!(
        code(&["point", "--lambdas", "-1", "--metric", "none", "--distortion", "1"]),
        1
    );
    assert_eq!(
        code(&["curve", "--lambdas", "1", "--metric", "none", "--distortion", "1:0:3"]),
        1
    );
    assert_eq!(code(&["point", "--metric", "none", "--distortion", "1"]), 1);
    assert_eq!(
        code(&[
            "point",
            "--covariance",
            "/nonexistent/cov.txt",
            "--metric",
            "none",
            "--distortion",
            "1"
        ]),
        1
    );
}

#[test]
fn malformed_covariance_names_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "2\n1 0\n0 oops\n").unwrap();
    let out = run(&[
        "point",
        "--covariance",
        path.to_str().unwrap(),
        "--metric",
        "none",
        "--distortion",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("field 2"), "{err}");
}

#[test]
fn verify_report_is_deterministic() {
    let args = [
        "verify",
        "--lambdas",
        "2,1",
        "--metric",
        "kl",
        "--distortion",
        "1",
        "--perception",
        "0.05",
        "--samples",
        "50000",
        "--seed",
        "9",
        "--jobs",
        "2",
    ];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["passed"], true);
    assert!(f(&v["rate_delta"]) <= 1e-4);
}

#[test]
fn verify_unconstrained_matches_waterfill() {
    let v = json(&[
        "verify",
        "--lambdas",
        "1,1",
        "--metric",
        "none",
        "--distortion",
        "1",
        "--samples",
        "20000",
    ]);
    assert!((f(&v["oracle_rate_nats"]) - std::f64::consts::LN_2).abs() <= 1e-4);
}
