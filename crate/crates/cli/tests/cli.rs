use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zrange(args: &[&str], config: &str, out: &Path) -> Output {
    let cfg = out.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_zrange"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn rows(out: &Path, command: &str) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(out.join(format!("{command}.csv"))).unwrap();
    let header = r.headers().unwrap().clone();
    let mut all = vec![header];
    all.extend(r.records().map(|x| x.unwrap()));
    all
}

fn column(rows: &[csv::StringRecord], name: &str) -> usize {
    rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn resonance_of_square_well() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"potential": {"profile": "square_well", "strength": 1.0}, "grid": {"n": 800}}"#;
    let out = zrange(&["resonance"], cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(dir.path(), "resonance");
    let lc: f64 = rows[1][column(&rows, "lambda_critical")].parse().unwrap();
    assert!((lc - 2.4674).abs() < 1e-4, "{lc}");
    assert_eq!(&rows[1][column(&rows, "status")], "ok");
}

#[test]
fn kernel_pole_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"grid": {"n": 16}, "sweep": {"points": [{"q1": [0.5, 0.2], "q2": [-0.5, -0.2]}]}}"#;
    let out = zrange(&["kernel22"], cfg, dir.path());
    assert!(out.status.success());
    let rows = rows(dir.path(), "kernel22");
    assert_eq!(&rows[1][column(&rows, "kernel")], "pole");
    assert_eq!(&rows[1][column(&rows, "status")], "flagged");
}

#[test]
fn missing_grid_n_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"potential": {"profile": "square_well", "strength": 1.0}, "grid": {"r_max": 10.0}}"#;
    let out = zrange(&["kk-verify"], cfg, dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("grid.n"), "{err}");
    assert!(!dir.path().join("kk-verify.csv").exists());
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let out = zrange(&["kk-verify"], "{\"grid\": {\"n\": 100,}}", dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn flags_override_config_and_echo_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"potential": {"profile": "square_well", "strength": 1.0}, "grid": {"n": 40, "r_max": 10.0},
                  "sweep": {"z": [1.0]}}"#;
    let out = zrange(&["kk-verify", "--grid-n", "60", "--rmax", "8", "--refine", "1"], cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("kk-verify.summary.json")).unwrap()).unwrap();
    let echo = &summary["config"];
    assert_eq!(echo["grid"]["n"], 60);
    assert_eq!(echo["grid"]["r_max"], 8.0);
    assert_eq!(echo["grid"]["refine"], 1);
    assert_eq!(summary["command"], "kk-verify");
    assert_eq!(summary["status"]["ok"], 1);

    // the echo is itself a valid configuration that reproduces the run
    let again = tempfile::tempdir().unwrap();
    let out = zrange(&["kk-verify"], &echo.to_string(), again.path());
    assert!(out.status.success());
    assert_eq!(
        fs::read(dir.path().join("kk-verify.csv")).unwrap(),
        fs::read(again.path().join("kk-verify.csv")).unwrap()
    );
}

#[test]
fn numerical_failure_is_a_row_status() {
    let dir = tempfile::tempdir().unwrap();
    // no resonance below strength 1 for the unit square well
    let cfg = r#"{"potential": {"profile": "square_well", "strength": 1.0}, "grid": {"n": 200},
                  "sweep": {"bracket": [0.1, 1.0]}}"#;
    let out = zrange(&["resonance"], cfg, dir.path());
    assert!(out.status.success());
    let rows = rows(dir.path(), "resonance");
    assert_eq!(&rows[1][column(&rows, "status")], "error");
}

#[test]
fn efimov_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"grid": {"n": 400, "r_max": 100.0, "spacing": {"kind": "logarithmic", "r_min": 1e-6}},
                  "sweep": {"couplings": [2.8]}}"#;
    let out = zrange(&["efimov"], cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(dir.path(), "efimov");
    let header: Vec<&str> = rows[0].iter().collect();
    assert_eq!(header, ["C", "n_negative", "ratio", "deviation", "classification", "grid_n", "r_min", "r_max", "status"]);
}
