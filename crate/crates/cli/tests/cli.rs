use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

use qnls_cli::{build_data, FieldSpec};
use qnls_core::grid::io::save_field;
use qnls_core::symmetry::Gaussian;
use qnls_core::make_grid;

fn qnls(command: &str, config: &Path, out: &Path) -> (bool, Value) {
    let output = Command::new(env!("CARGO_BIN_EXE_qnls"))
        .args([command, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    let stdout = String::from_utf8(output.stdout).unwrap();
    let json: Value = serde_json::from_str(stdout.trim()).unwrap_or_else(|e| panic!("{e}: {stdout}"));
    (output.status.success(), json)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn summary(run: &Value) -> Value {
    let dir = PathBuf::from(run["run_dir"].as_str().unwrap());
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const ZERO_SIMULATE: &str = r#"
[grid]
dim = 3
n = 16
half_width = 4.0

[solver]
dt = 0.01
t_end = 0.1
record_every = 2

[task]
kind = "simulate"
"#;

#[test]
fn zero_data_simulation_completes_with_zero_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), ZERO_SIMULATE);
    let (ok, run) = qnls("simulate", &config, &tmp.path().join("out"));
    assert!(ok, "{run}");
    let s = summary(&run);
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["result"]["outcome"]["kind"], "completed");
    assert_eq!(s["result"]["samples"], 6);

    let csv = fs::read_to_string(PathBuf::from(run["run_dir"].as_str().unwrap()).join("series.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("t,mass,energy"));
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cells[1..].iter().all(|&x| x == 0.0), "{line}");
    }
}

#[test]
fn identical_configs_give_identical_summaries_and_runs_are_never_overwritten() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), ZERO_SIMULATE);
    let (_, a) = qnls("simulate", &config, &tmp.path().join("a"));
    let (_, b) = qnls("simulate", &config, &tmp.path().join("b"));
    assert_eq!(a["config_hash"], b["config_hash"]);
    let read = |run: &Value| fs::read(PathBuf::from(run["run_dir"].as_str().unwrap()).join("summary.json")).unwrap();
    assert_eq!(read(&a), read(&b));

    let (ok, again) = qnls("simulate", &config, &tmp.path().join("a"));
    assert!(!ok);
    assert_eq!(again["status"], "error");
    assert_eq!(again["error"]["kind"], "run_exists");
}

#[test]
fn subcommand_must_match_task() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), ZERO_SIMULATE);
    let (ok, out) = qnls("bounds", &config, &tmp.path().join("out"));
    assert!(!ok);
    assert_eq!(out["error"]["kind"], "task_mismatch");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn bad_config_reports_machine_readable_error() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &ZERO_SIMULATE.replace("n = 16", "n = 10"));
    let (ok, out) = qnls("simulate", &config, &tmp.path().join("out"));
    assert!(!ok);
    assert_eq!(out["schema_version"], 1);
    assert_eq!(out["error"]["kind"], "invalid_grid");
}

#[test]
fn file_ref_round_trip_is_bit_exact() {
    let tmp = TempDir::new().unwrap();
    let grid = make_grid(3, 8, 2.0).unwrap();
    let mut g = Gaussian::new(1.3, 0.7);
    g.phase = 0.4;
    g.boost = vec![std::f64::consts::PI / 2.0, 0.0, 0.0];
    let field = g.sample(&grid).unwrap();
    save_field(&tmp.path().join("f.nls"), &field).unwrap();
    let back = build_data(&FieldSpec::FileRef { path: "f.nls".into() }, &grid, tmp.path()).unwrap();
    assert_eq!(back.values(), field.values());

    let other = make_grid(3, 16, 2.0).unwrap();
    assert!(build_data(&FieldSpec::FileRef { path: "f.nls".into() }, &other, tmp.path()).is_err());
}

#[test]
fn bounds_on_stored_potential_report_all_three_kinds() {
    let tmp = TempDir::new().unwrap();
    let grid = make_grid(3, 16, 6.0).unwrap();
    save_field(&tmp.path().join("v0.nls"), &Gaussian::new(4.0, 1.0).sample(&grid).unwrap()).unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[grid]
dim = 3
n = 16
half_width = 6.0

[data.u0]
family = "gaussian"
amplitude = 4.0
width = 1.0

[data.v0]
family = "file_ref"
path = "v0.nls"

[task]
kind = "bounds"
"#,
    );
    let (ok, run) = qnls("bounds", &config, &tmp.path().join("out"));
    assert!(ok, "{run}");
    let result = &summary(&run)["result"];
    let kinds: Vec<&str> = result["reports"].as_array().unwrap().iter().map(|r| r["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["EnergySign", "Eigenvalue", "LargeData"]);
    for r in result["reports"].as_array().unwrap() {
        assert!(r["bound_value"].as_f64().unwrap() > 0.0, "{r}");
    }
    assert!(result["not_evaluated"].as_array().unwrap().is_empty());
}

#[test]
fn symmetry_check_reports_equivariance_and_scaling() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[grid]
dim = 2
n = 64
half_width = 6.283185307179586

[solver]
dt = 0.01
t_end = 0.2
dealias = false

[data.u0]
family = "gaussian"
amplitude = 1.0
width = 0.7

[data.v0]
family = "gaussian"
amplitude = 0.5
width = 0.8

[task]
kind = "symmetry-check"
xi = [1.0, 0.5]
"#,
    );
    let (ok, run) = qnls("symmetry-check", &config, &tmp.path().join("out"));
    assert!(ok, "{run}");
    let result = &summary(&run)["result"];
    assert!(result["equivariance"]["relative"].as_f64().unwrap() < 1e-8, "{result}");
    let scaling = &result["scaling"];
    for key in ["mass_ratio", "energy_ratio", "fh_half_ratio"] {
        let got = scaling[key].as_f64().unwrap();
        let expected = scaling[format!("{key}_expected")].as_f64().unwrap();
        assert!((got - expected).abs() < 1e-8 * expected, "{key}: {got} vs {expected}");
    }
}

#[test]
fn groundstate_writes_profiles() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[grid]
dim = 1
n = 256
half_width = 16.0

[task]
kind = "groundstate"
omega = 1.0
tol = 1e-10
"#,
    );
    let (ok, run) = qnls("groundstate", &config, &tmp.path().join("out"));
    assert!(ok, "{run}");
    let dir = PathBuf::from(run["run_dir"].as_str().unwrap());
    assert!(dir.join("q1.nls").is_file() && dir.join("q2.nls").is_file());
    let result = &summary(&run)["result"];
    assert!(result["residual1"].as_f64().unwrap() < 1e-10);
    assert!(result["profile_q1"]["min_value"].as_f64().unwrap() > -1e-10);
}

#[test]
fn threshold_without_upper_bracket_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[grid]
dim = 3
n = 16
half_width = 8.0

[solver]
dt = 0.05
t_end = 1.0
record_every = 1

[data.u0]
family = "gaussian"
amplitude = 1.0
width = 1.0

[task]
kind = "threshold"
a_lo = 0.0
a_hi = 0.01
"#,
    );
    let (ok, out) = qnls("threshold", &config, &tmp.path().join("out"));
    assert!(!ok);
    assert_eq!(out["error"]["kind"], "bracket_invalid", "{out}");
    assert!(out["error"]["message"].as_str().unwrap().contains("no upper bracket"));
}
