use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hamspray"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn catalog_to(dir: &Path, name: &str) -> String {
    let out = run(&["catalog", name]);
    assert_eq!(out.status.code(), Some(0));
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, &out.stdout).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn validate_tangent_passes() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "tangent2");
    let out = run(&["validate", &m]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "pass");
    assert_eq!(v["seed"], 0);
}

#[test]
fn validate_perturbed_rotation_fails_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "so3_perturbed");
    let out = run(&["validate", &m, "--seed", "9"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["status"], "fail");
    assert_eq!(v["seed"], 9);
    assert!(v["witness"]["x1"].is_number());
}

#[test]
fn semispray_on_cotangent() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "cotangent");
    let out = run(&["check", "semispray", &m]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["check"], "semispray");
}

#[test]
fn every_suite_passes_on_rotation_chart() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "so3");
    for suite in ["jacobi", "semispray", "homotopy", "prolongation"] {
        let out = run(&["check", suite, &m, "--trials", "16"]);
        assert_eq!(out.status.code(), Some(0), "{suite}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn spray_check_distinguishes_force() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "metric2");
    assert_eq!(run(&["check", "spray", &m]).status.code(), Some(0));
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
    doc["f"] = Value::String("x1".into());
    let forced = dir.path().join("forced.json");
    std::fs::write(&forced, doc.to_string()).unwrap();
    assert_eq!(run(&["check", "spray", forced.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "cotangent_so3");
    let a = run(&["check", "jacobi", &m, "--seed", "42"]);
    let b = run(&["check", "jacobi", &m, "--seed", "42"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 42);
}

#[test]
fn unknown_symbol_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"n":2,"r":1,"coords":["x1","x2"],"fibers":["y1"],"rho":[["1","w"]],"L":"y1^2/2"}"#).unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`w`") && err.contains("rho[0][1]"), "{err}");

    std::fs::write(&path, r#"{"n":1,"r":1,"coords":["x1"],"fibers":["y1"],"rho":[["1"]],"Theta":{},"L":"y1^2/2 + v"}"#).unwrap();
    let err = String::from_utf8_lossy(&run(&["bracket", path.to_str().unwrap()]).stderr).into_owned();
    assert!(err.contains("`v`") && err.contains(" L"), "{err}");
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(run(&["validate", "/nonexistent/model.json"]).status.code(), Some(2));
    assert_eq!(run(&["catalog", "klein_bottle"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "tangent1");
    assert_eq!(run(&["validate", &m, "--box", "q=0,1"]).status.code(), Some(2));
    assert_eq!(run(&["integrate", &m, "--x0", "0,0", "--y0", "1"]).status.code(), Some(2));
}

#[test]
fn strict_mode_refuses_broken_chart() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "so3_perturbed");
    assert_eq!(run(&["bracket", &m]).status.code(), Some(0));
    let out = run(&["bracket", &m, "--strict"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["check"], "structure");
}

#[test]
fn box_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "tangent1");
    // L = y1^3/6 has Hessian y1; a box away from zero passes.
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
    doc["L"] = Value::String("y1^3/6".into());
    std::fs::write(&m, doc.to_string()).unwrap();
    assert_eq!(run(&["validate", &m, "--box", "-1,1", "--box", "y1=0.5,2"]).status.code(), Some(0));
    let out = run(&["validate", &m, "--box", "-1,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["witness"]["y1"].is_number());
}

#[test]
fn integrate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "tangent1");
    let out = run(&["integrate", &m, "--x0", "0", "--y0", "1", "--T", "1", "--h", "0.25", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1,y1,drift");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("1e0,1e0,"));

    let out = run(&["integrate", &m, "--x0", "-0.5", "--y0", "1", "--method", "rk45", "--h", "0.1"]);
    let v = json(&out);
    let x = v["trajectory"]["x"].as_array().unwrap();
    assert!((x.last().unwrap()[0].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn prolong_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = catalog_to(dir.path(), "tangent1");
    let v = json(&run(&["prolong", "theta", &m]));
    assert_eq!(v["theta_L"]["components"]["E1"], "y1");
    let v = json(&run(&["prolong", "omega", &m]));
    assert_eq!(v["omega_L"]["components"]["E1,V1"], "-1");
    let v = json(&run(&["prolong", "sigma", &m]));
    assert_eq!(v["sigma"]["E"][0], "y1");
    let out = run(&["prolong", "decompose", &m]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["zeta"]["components"]["E1"], "y1");
}
