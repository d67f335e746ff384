use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn spec(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name);
    root.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_friedrichs-kit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn classify_alpha_two_has_signed_boundary_map() {
    let out = run(&["classify", "--spec", &spec("unit_scalar.json"), "--bc", r#"{"kind":"alpha","alpha":2}"#]);
    let v = json(&out);
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["signed_boundary_map"], true);
    assert_eq!(v["bijective"], true);
    assert_eq!(v["selfadjoint_type"], false);
    assert_eq!(v["m_count"], "2");
    assert!((v["alpha_beta"]["re"].as_f64().unwrap() - (-1.0f64).exp()).abs() < 1e-8);
    assert_eq!(v["U"]["domain_dim"], 1);
}

#[test]
fn count_depends_on_field() {
    assert_eq!(json(&run(&["count", "--spec", &spec("unit_scalar.json")]))["m"], "2");
    assert_eq!(json(&run(&["count", "--spec", &spec("unit_scalar_complex.json")]))["m"], "infinite");
    assert_eq!(json(&run(&["count", "--spec", &spec("block.json")]))["m"], "0");
}

#[test]
fn reports() {
    let v = json(&run(&["report", "--spec", &spec("unit_scalar.json")]));
    assert_eq!(v["validate"]["mu"], 1.0);
    assert_eq!(v["kernels"]["d_plus"], 1);
    assert_eq!(v["kernels"]["d_minus"], 1);
    assert_eq!(v["count"]["m"], "2");
    let ab = v["sweep_alpha"]["alpha_beta"]["re"].as_f64().unwrap();
    assert!((ab - (-1.0f64).exp()).abs() < 1e-8);

    let v = json(&run(&["report", "--spec", &spec("block.json")]));
    assert_eq!(v["kernels"]["d_plus"], 2);
    assert_eq!(v["kernels"]["d_minus"], 1);
    assert_eq!(v["count"]["m"], "0");
    assert!(v["sweep_alpha"].is_null());

    let v = json(&run(&["report", "--spec", &spec("unit_scalar_complex.json")]));
    assert_eq!(v["count"]["m"], "infinite");
}

#[test]
fn output_is_deterministic() {
    let args = ["sweep-alpha", "--spec", &spec("unit_scalar.json")];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn usage_errors_exit_3() {
    let out = run(&["count", "--spec", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
    assert_eq!(run(&["count"]).status.code(), Some(3));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn validation_errors_exit_1_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("unknown.json");
    std::fs::write(
        &unknown,
        r#"{"field":"real","interval":[0,1],"dimension":1,"A":[["1"]],"C":[["1"]],"extra":1}"#,
    )
    .unwrap();
    let out = run(&["report", "--spec", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());

    let negative = dir.path().join("negative.json");
    std::fs::write(&negative, r#"{"field":"real","interval":[0,1],"dimension":1,"A":[["1"]],"C":[["x - 1"]]}"#).unwrap();
    let out = run(&["validate", "--spec", negative.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());

    let out = run(&["classify", "--spec", &spec("unit_scalar.json"), "--bc", r#"{"kind":"alpha","alpha":1,"x":0}"#]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_2() {
    // Within 1e-14 of the critical alpha the trace system is hopelessly
    // ill conditioned once the rank test is disabled.
    let alpha = (-1.0f64).exp() + 1e-14;
    let bc = format!(r#"{{"kind":"alpha","alpha":{alpha}}}"#);
    let out = run(&["solve", "--spec", &spec("unit_scalar.json"), "--bc", &bc, "--rhs", "1", "--rank-tol", "1e-16"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("u.csv");
    let out = run(&[
        "solve",
        "--spec",
        &spec("unit_scalar.json"),
        "--bc",
        r#"{"kind":"alpha","alpha":"inf"}"#,
        "--rhs",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let v = json(&out);
    assert!(v["residual_l2"].as_f64().unwrap() < 1e-8);
    let text = std::fs::read_to_string(&csv).unwrap();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() < 1e-15);
    assert!((last[1] - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
}

#[test]
fn defect_harness_and_text_format() {
    let out = run(&[
        "defect",
        "--spec",
        &spec("unit_scalar.json"),
        "--samples",
        &spec("scalar_samples.json"),
    ]);
    let v = json(&out);
    assert_eq!(v["harness"]["verdict"], "PASS");
    assert!(v["harness"]["rows"][3]["indices"].is_null());

    let out = run(&["count", "--spec", &spec("block.json"), "--format", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("m ") && l.ends_with("0")));
}

#[test]
fn span_and_matrix_conditions() {
    let v = json(&run(&[
        "classify",
        "--spec",
        &spec("system2.json"),
        "--bc",
        r#"{"kind":"matrices","Ma":[[1,0],[0,1]],"Mb":[[0,0],[0,0]]}"#,
    ]));
    // u(a) = 0 on a 2x2 system with indefinite A is bijective but not signed.
    assert_eq!(v["bijective"], true);
    assert!(v["alpha_beta"].is_null());

    let v = json(&run(&[
        "classify",
        "--spec",
        &spec("block.json"),
        "--bc",
        r#"{"kind":"span","vectors":[[0,1,0,0]]}"#,
    ]));
    assert_eq!(v["V"].as_array().unwrap().len(), 1);
}
