use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SCENARIO: &str = r#"
suites = ["hardy-oracle", "operators", "norms", "projection-bound", "proof-chain"]
seed = 11
[grid]
n = 512
e_max = 50.0
scale = 1.0
[resonance]
e0 = 1.0
gamma = 0.3
[times]
t_max = 40.0
samples = 16
"#;

fn lpscatter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpscatter")).args(args).output().expect("binary runs")
}

fn write_scenario(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn run_writes_tables_summary_and_manifest() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), SCENARIO);
    let out_dir = dir.path().join("out");
    let out = lpscatter(&["run", "--scenario", &scenario, "--out", out_dir.to_str().unwrap()]);
    assert!(matches!(code(&out), 0 | 4), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["hardy-oracle.csv", "operators.csv", "norms.csv", "projection-bound.csv", "proof-chain.csv", "summary.txt", "manifest.txt"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 5);
    let mut reader = csv::Reader::from_path(out_dir.join("norms.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let closed: f64 = rows[1][2].parse().unwrap();
    assert!((closed - std::f64::consts::PI / 0.3).abs() < 1e-12);
}

#[test]
fn runs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let text = SCENARIO.replace(r#"["hardy-oracle", "operators", "norms", "projection-bound", "proof-chain"]"#, r#"["lyapunov"]"#);
    let scenario = write_scenario(dir.path(), &text);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    lpscatter(&["run", "--scenario", &scenario, "--out", a.to_str().unwrap()]);
    lpscatter(&["run", "--scenario", &scenario, "--out", b.to_str().unwrap()]);
    let ta = fs::read_to_string(a.join("lyapunov.csv")).unwrap();
    let tb = fs::read_to_string(b.join("lyapunov.csv")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn unknown_keys_exit_with_config_error() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), &SCENARIO.replace("scale = 1.0", "scale = 1.0\nfoo = 2"));
    let out = lpscatter(&["run", "--scenario", &scenario]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn missing_scenario_exits_with_config_error() {
    let out = lpscatter(&["run", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unresolved_pole_exits_with_precondition_error() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), &SCENARIO.replace("gamma = 0.3", "gamma = 0.001"));
    let out = lpscatter(&["run", "--scenario", &scenario]);
    assert_eq!(code(&out), 3);
}

#[test]
fn empty_sweep_values_exit_with_config_error() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), SCENARIO);
    let out = lpscatter(&["sweep", "--scenario", &scenario, "--axis", "gamma_ratio", "--values", ""]);
    assert_eq!(code(&out), 2);
    let out = lpscatter(&["sweep", "--scenario", &scenario, "--axis", "width", "--values", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), SCENARIO);
    let out_dir = dir.path().join("sweep");
    let out = lpscatter(&["sweep", "--scenario", &scenario, "--axis", "gamma_ratio", "--values", "0.5,0.3", "--out", out_dir.to_str().unwrap()]);
    assert!(matches!(code(&out), 0 | 4), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(reader.records().count(), 2);
    assert!(out_dir.join("manifest.txt").exists());
}

#[test]
fn lp_limit_passes_on_a_small_grid() {
    let dir = TempDir::new().unwrap();
    let out = lpscatter(&["lp-limit", "--n", "256", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("lp-limit.csv").exists());
}

#[test]
fn verify_hardy_passes_on_a_moderate_grid() {
    let dir = TempDir::new().unwrap();
    let out = lpscatter(&["verify-hardy", "--n", "1024", "--emax", "200", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn invalid_parameters_exit_with_config_error() {
    let out = lpscatter(&["verify-hardy", "--n", "4", "--emax", "50"]);
    assert_eq!(code(&out), 2);
    let out = lpscatter(&["verify-hardy", "--n", "64", "--emax", "-1"]);
    assert_eq!(code(&out), 2);
}
