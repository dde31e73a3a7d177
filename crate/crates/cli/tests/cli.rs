use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coldwave_cli::parse_angle;
use coldwave_core::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE};
use proptest::prelude::*;
use serde_json::Value;

fn coldwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coldwave")).args(args).output().expect("spawn coldwave")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const ELECTRON: &str = r#"{"B0": 1.0, "species": [{"name": "electron", "density_m3": 1e18}]}"#;

fn mixed_problem(g: &str) -> String {
    format!(
        r#"{{"kappa": 0.0, "domain": {{"rects": [[0, 1, 0, 1]]}}, "grid": {{"nx": 17, "ny": 17}},
            "bc": {{"type": "mixed", "G": {g}}}, "forcing": {{"kind": "expr_id", "id": "smooth"}}}}"#
    )
}

#[test]
fn vacuum_stix_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let vac = write(dir.path(), "vac.json", r#"{"B0": 1.0, "species": []}"#);
    let out = coldwave(&["stix", "--plasma", vac.to_str().unwrap(), "--omega", "1e9"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    for (key, want) in [("R", 1.0), ("L", 1.0), ("s", 1.0), ("d", 0.0), ("p", 1.0)] {
        assert_eq!(v[key].as_f64(), Some(want), "{key}");
    }
}

#[test]
fn origin_chars_reports_four_lines() {
    let out = coldwave(&["origin-chars"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["count"], 4);
    let roots: Vec<f64> = v["roots"].as_array().unwrap().iter().map(|r| r.as_f64().unwrap()).collect();
    assert!((roots[0] - (17f64.sqrt() - 1.0) / 8.0).abs() < 1e-15);
    assert!((roots[1] + (17f64.sqrt() + 1.0) / 8.0).abs() < 1e-15);
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chars.json");
    let out = coldwave(&["origin-chars", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), coldwave(&["origin-chars"]).stdout);
}

#[test]
fn invalid_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let neg = write(dir.path(), "neg.json", r#"{"B0": 1.0, "species": [{"name": "electron", "density_m3": -1}]}"#);
    let out = coldwave(&["validate", "--plasma", neg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("negative density"));

    let e = write(dir.path(), "e.json", ELECTRON);
    let e = e.to_str().unwrap();
    let out = coldwave(&["cutoffs", "--plasma", e, "--omega-min", "1e10", "--omega-max", "1e9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("omega_min < omega_max"));

    let out = coldwave(&["energy-check", "--kappa", "2.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("kappa out of range"));

    let small = write(
        dir.path(),
        "small.json",
        r#"{"kappa": 0.5, "domain": {"rects": [[1.5, 2.5, -0.4, 0.4]]}, "grid": {"nx": 5, "ny": 17},
            "bc": {"type": "closed_dirichlet"}, "forcing": {"kind": "expr_id", "id": "one"}}"#,
    );
    let out = coldwave(&["solve", "--problem", small.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("at least 8"));

    let out = coldwave(&["stix", "--plasma", e, "--omega", "1e9", "--tol", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let e = write(dir.path(), "e.json", ELECTRON);
    let cyclotron = (ELEMENTARY_CHARGE / ELECTRON_MASS).to_string();
    let out = coldwave(&["stix", "--plasma", e.to_str().unwrap(), "--omega", &cyclotron]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = coldwave(&["layered", "--k11", r#"{"kind": "affine_quadratic", "a": 1.0}"#, "--sigma0", "1", "--x0", "-1", "--x1", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &mixed_problem("[0, 1]"));
    let out = coldwave(&["solve-mixed", "--problem", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let good = write(dir.path(), "good.json", &mixed_problem("[2, 3]"));
    let out = coldwave(&["solve-mixed", "--problem", good.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["admissibility"]["admissible"], true);
    assert!(v["residual_norm"].as_f64().unwrap() < 1e-6 * v["rhs_norm"].as_f64().unwrap());
}

#[test]
fn energy_check_passes_with_seed() {
    let out = coldwave(&["energy-check", "--kappa", "1", "--trials", "3", "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["trials"].as_array().unwrap().len(), 3);
    assert!(v["min_ratio"].as_f64().unwrap() >= v["bound"].as_f64().unwrap());
}

#[test]
fn solve_writes_nodal_csv() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(
        dir.path(),
        "p.json",
        r#"{"kappa": 0.5, "domain": {"rects": [[1.5, 2.5, -0.4, 0.4]]}, "grid": {"nx": 9, "ny": 9},
            "bc": {"type": "closed_dirichlet"}, "forcing": {"kind": "expr_id", "id": "manufactured"}}"#,
    );
    let out = coldwave(&["solve", "--problem", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,u"));
    assert_eq!(lines.count(), 81);
}

#[test]
fn angle_units() {
    assert!((parse_angle("90deg").unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    assert_eq!(parse_angle("1.5708rad").unwrap(), 1.5708);
    assert_eq!(parse_angle("0.25").unwrap(), 0.25);
    assert!(parse_angle("ninety").is_err());
    assert!(parse_angle("1e400deg").is_err());
}

proptest! {
    #[test]
    fn degrees_and_radians_agree(deg in -720.0..720.0f64) {
        let a = parse_angle(&format!("{deg}deg")).unwrap();
        let b = parse_angle(&format!("{}rad", deg.to_radians())).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
