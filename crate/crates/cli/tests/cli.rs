use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn dualflat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualflat")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn problem_file(dir: &tempfile::TempDir, text: &str) -> String {
    let path = dir.path().join("problem.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const GAUSSIAN: &str = r#"{
    "family": {"kind": "gaussian1d"},
    "points": {"P": {"params": {"mu": 0, "sigma": 1}}, "Q": {"params": {"mu": 1, "sigma": 2}}},
    "tasks": [
        {"op": "affine", "args": ["P", "Q"]},
        {"op": "canonical", "args": ["P", "P"]},
        {"op": "renyi", "args": ["P", "Q"], "alpha": 0.5}
    ]
}"#;

#[test]
fn compute_gaussian_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = dualflat(&["compute", &problem_file(&dir, GAUSSIAN)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["results"][0]["value"].as_f64(), Some(1.75));
    assert_eq!(json["results"][0]["status"], "ok");
    assert_eq!(json["results"][1]["value"].as_f64(), Some(0.0));
    assert_eq!(json["results"][2]["parameters"]["alpha"].as_f64(), Some(0.5));
    assert_eq!(json["points"]["Q"]["theta"][0].as_f64(), Some(-0.125));
}

#[test]
fn compute_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dualflat(&["compute", &problem_file(&dir, GAUSSIAN), "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("op,args,alpha,weights,chart,value,status\naffine,P;Q,,,,1.75,ok\n"));
    assert!(!text.contains('\r'));
}

#[test]
fn compute_reports_domain_errors_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "family": {"kind": "gaussian1d"},
        "points": {"P": {"params": {"mu": 0, "sigma": -1}}, "Q": {"params": {"mu": 0, "sigma": 1}}},
        "tasks": [{"op": "affine", "args": ["P", "Q"]}, {"op": "affine", "args": ["Q", "Q"]}]
    }"#;
    let out = dualflat(&["compute", &problem_file(&dir, text)]);
    assert_eq!(code(&out), 2);
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["results"][0]["status"], "domain_error");
    assert!(json["results"][0].get("value").is_none());
    assert_eq!(json["results"][1]["status"], "ok");
}

#[test]
fn compute_marks_unsupported_operations() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "family": {"kind": "mixture", "components": [[0.5, 0.5], [0.9, 0.1]]},
        "points": {"P": {"eta": [0.2]}, "Q": {"params": {"weights": [0.7]}}},
        "tasks": [{"op": "renyi", "args": ["P", "Q"], "alpha": 0.5}, {"op": "phi_divergence", "args": ["P", "Q"], "alpha": 0.5}]
    }"#;
    let out = dualflat(&["compute", &problem_file(&dir, text)]);
    assert_eq!(code(&out), 2);
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["results"][0]["status"], "unsupported");
    assert_eq!(json["results"][1]["status"], "ok");
}

#[test]
fn compute_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dualflat(&["compute", &problem_file(&dir, "{\"family\": {\"kind\": \"gaussian1d\"},\n \"points\": 3}")]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let wrong_dimension = r#"{"family": {"kind": "gaussian1d"}, "points": {"P": {"theta": [-0.5]}}, "tasks": []}"#;
    assert_eq!(code(&dualflat(&["compute", &problem_file(&dir, wrong_dimension)])), 1);

    let undefined = r#"{"family": {"kind": "gaussian1d"}, "points": {}, "tasks": [{"op": "affine", "args": ["P", "Q"]}]}"#;
    assert_eq!(code(&dualflat(&["compute", &problem_file(&dir, undefined)])), 1);

    assert_eq!(code(&dualflat(&["compute", "/nonexistent/problem.json"])), 1);
}

#[test]
fn verify_selfdual_passes() {
    let out = dualflat(&["verify", "--family", "selfdual:2", "--seed", "1", "--samples", "100"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("parallelogram_law[theta]"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_rejects_bad_flags() {
    assert_eq!(code(&dualflat(&["verify", "--family", "binomial:10", "--samples", "0"])), 1);
    assert_eq!(code(&dualflat(&["verify", "--family", "poisson"])), 1);
    assert_eq!(code(&dualflat(&["verify", "--family", "binomial:0"])), 1);
    assert_eq!(code(&dualflat(&["verify", "--family", "gaussian1d", "--tol-closed", "-1"])), 1);
    assert_eq!(code(&dualflat(&["verify"])), 1);
}

#[test]
fn verify_fails_with_exit_3_under_impossible_tolerance() {
    let out = dualflat(&["verify", "--family", "gaussian1d", "--samples", "20", "--tol-quad", "1e-300"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn verify_json_output() {
    let out = dualflat(&["verify", "--family", "mixture", "--seed", "3", "--samples", "20", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["config"]["seed"], 3);
    let reports = json["reports"].as_array().unwrap();
    assert!(reports.iter().any(|r| r["name"] == "jeffreys_bounds_jensen_shannon"));
    assert!(reports.iter().all(|r| r["worst_case"]["check"].is_string()));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&dualflat(&["--help"])), 0);
    assert_eq!(code(&dualflat(&["--version"])), 0);
    assert_eq!(code(&dualflat(&["verify", "--help"])), 0);
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn geodesic_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let theta_path = dir.path().join("theta.csv");
    let args = ["geodesic", "--family", "gaussian1d", "--from", "params:mu=0,sigma=1", "--to", "params:mu=1,sigma=2"];
    let out = dualflat(&[&args[..], &["--output", theta_path.to_str().unwrap()]].concat());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let theta_csv = fs::read_to_string(&theta_path).unwrap();
    assert!(theta_csv.starts_with("t,theta1,theta2,eta1,eta2,canonical,affine\n"));
    assert!(!theta_csv.contains('\r'));
    let theta = rows(&theta_csv);
    assert_eq!(theta.len(), 11);
    assert!((theta[10][6] - 1.75).abs() < 1e-12);

    let out = dualflat(&[&args[..], &["--chart", "eta"]].concat());
    assert_eq!(code(&out), 0);
    let eta = rows(&String::from_utf8(out.stdout).unwrap());
    assert!((eta[10][6] - 1.75).abs() < 1e-12);
    assert!((eta[5][6] - theta[5][6]).abs() > 1e-3);
}

#[test]
fn geodesic_degenerate_segment_is_zero() {
    let out = dualflat(&["geodesic", "--family", "selfdual:2", "--from", "theta:1,-2", "--to", "eta:1,-2", "--grid", "4"]);
    assert_eq!(code(&out), 0);
    let profile = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(profile.len(), 4);
    assert!(profile.iter().all(|r| r[5] == 0.0 && r[6] == 0.0));
}

#[test]
fn geodesic_domain_and_input_errors() {
    let out = dualflat(&["geodesic", "--family", "gaussian1d", "--from", "eta:1,2", "--to", "params:mu=0,sigma=1"]);
    assert_eq!(code(&out), 2);
    let out = dualflat(&["geodesic", "--family", "binomial:3", "--from", "params:p=0.3", "--to", "eta:3.5"]);
    assert_eq!(code(&out), 2);
    let out = dualflat(&["geodesic", "--family", "gaussian1d", "--from", "theta:-0.5", "--to", "theta:-0.5,0"]);
    assert_eq!(code(&out), 1);
    let out = dualflat(&["geodesic", "--family", "gaussian1d", "--from", "theta:-0.5,0", "--to", "theta:-1,0", "--grid", "1"]);
    assert_eq!(code(&out), 1);
}
