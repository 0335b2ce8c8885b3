//! Task execution and the run directory layout.
//!
//! Every run writes into `<out>/<task>-<hash>`, where `hash` identifies the resolved
//! config and the files it reads. The directory is assembled under a temporary name and
//! renamed when the task succeeds, so a run directory is always complete and is never
//! overwritten. Contents:
//!
//! | file | content |
//! |------|---------|
//! | `config.toml` | the config text as given |
//! | `config.json` | the resolved config, defaults filled in |
//! | `summary.json` | task result, deterministic for a given config |
//! | `timing.json` | wall-clock time |
//! | `*.csv`, `*.nls` | task-specific series and binary fields |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use qnls_core::dynamics::{evolve, DiagnosticSeries, State};
use qnls_core::grid::io::save_field;
use qnls_core::grid::fh_half_norm;
use qnls_core::groundstate::{check_profile, solve_ground_state};
use qnls_core::observables::{energy, mass};
use qnls_core::spectral_criterion::{
    energy_sign_bound, eigenvalue_bound, large_data_bound, large_data_parts, lowest_eigenpair, theta_scan, BoundKind,
};
use qnls_core::symmetry::{check_equivariance, rescale_onto_shrunk_grid};
use qnls_core::threshold::{bisect_threshold, scan_l_curve, ThresholdConfig};
use qnls_core::Field;

use crate::config::{load_config, RunConfig, Task, SCHEMA_VERSION};
use crate::data::DataBuilder;
use crate::error::{CliError, Result};

/// Outcome of a successful run.
#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub run_dir: PathBuf,
    pub config_hash: String,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_series(path: &Path, series: &DiagnosticSeries) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    series.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Load the config, check it belongs to `command`, run it and write the run directory.
pub fn execute(command: &str, config_path: &Path, out: &Path, overrides: &[String]) -> Result<RunInfo> {
    let (config, text, base_dir) = load_config(config_path, overrides)?;
    if config.task.name() != command {
        return Err(CliError::TaskMismatch { command: command.into(), task: config.task.name().into() });
    }
    let hash = config.hash(&base_dir)?;
    let name = format!("{}-{hash}", config.task.name());
    let run_dir = out.join(&name);
    if run_dir.exists() {
        return Err(CliError::RunExists(run_dir));
    }
    fs::create_dir_all(out)?;
    let staging = out.join(format!(".{name}.partial-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;

    let start = Instant::now();
    let result = write_run(&config, &text, &base_dir, &hash, &staging);
    if let Err(e) = result {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    write_json(&staging.join("timing.json"), &json!({ "wall_seconds": start.elapsed().as_secs_f64() }))?;
    if run_dir.exists() {
        let _ = fs::remove_dir_all(&staging);
        return Err(CliError::RunExists(run_dir));
    }
    fs::rename(&staging, &run_dir)?;
    info!("wrote {}", run_dir.display());
    Ok(RunInfo { run_dir, config_hash: hash })
}

fn write_run(config: &RunConfig, text: &str, base_dir: &Path, hash: &str, dir: &Path) -> Result<()> {
    fs::write(dir.join("config.toml"), text)?;
    write_json(&dir.join("config.json"), config)?;
    let result = run_task(config, base_dir, dir)?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "task": config.task.name(),
        "config_hash": hash,
        "version": env!("CARGO_PKG_VERSION"),
        "result": result,
    });
    write_json(&dir.join("summary.json"), &summary)
}

/// Run the configured task, writing its artifacts into `dir`; returns the summary result.
pub fn run_task(config: &RunConfig, base_dir: &Path, dir: &Path) -> Result<Value> {
    let grid = config.grid.build()?;
    let mut data = DataBuilder::new(&grid, base_dir);
    let needs_data = !matches!(config.task, Task::Groundstate { .. });
    let (u0, v0) = if needs_data {
        (data.build(&config.data.u0)?, data.build(&config.data.v0)?)
    } else {
        (Field::zeros(&grid), Field::zeros(&grid))
    };

    match &config.task {
        Task::Simulate { save_final } => {
            let initial = State::new(u0, v0, 0.0)?;
            initial.save(&dir.join("initial.nls"))?;
            let (last, series, outcome) = evolve(&initial, &config.solver)?;
            write_series(&dir.join("series.csv"), &series)?;
            if *save_final {
                last.save(&dir.join("final.nls"))?;
            }
            Ok(json!({
                "outcome": outcome,
                "samples": series.len(),
                "final_time": last.t,
                "max_relative_mass_drift": series.max_relative_mass_drift(),
                "max_relative_energy_drift": series.max_relative_energy_drift(),
                "w_proxy": series.w_proxy_norm(),
                "initial": energy(&initial),
                "final": energy(&last),
            }))
        }
        Task::Groundstate { omega, tol, max_iter } => {
            let gs = solve_ground_state(&grid, *omega, *tol, *max_iter)?;
            save_field(&dir.join("q1.nls"), &gs.q1)?;
            save_field(&dir.join("q2.nls"), &gs.q2)?;
            let mut w = BufWriter::new(fs::File::create(dir.join("history.csv"))?);
            writeln!(w, "iteration,residual1,residual2")?;
            for (i, (r1, r2)) in gs.history.iter().enumerate() {
                writeln!(w, "{},{r1:?},{r2:?}", i + 1)?;
            }
            w.flush()?;
            let state = State::new(gs.q1.clone(), gs.q2.clone(), 0.0)?;
            Ok(json!({
                "omega": gs.omega,
                "residual1": gs.residual1,
                "residual2": gs.residual2,
                "iterations": gs.iterations,
                "conserved": energy(&state),
                "profile_q1": check_profile(&gs.q1),
                "profile_q2": check_profile(&gs.q2),
            }))
        }
        Task::Eigen { theta, tol, max_iter } => {
            let res = match theta {
                Some(t) => lowest_eigenpair(&v0, *t, *tol, *max_iter)?,
                None => theta_scan(&v0, *tol, *max_iter)?,
            };
            save_field(&dir.join("phi.nls"), &res.phi)?;
            let bound = eigenvalue_bound(&v0, &res).ok();
            Ok(json!({
                "e_tilde": res.e_tilde,
                "theta": res.theta,
                "converged": res.converged,
                "residual": res.residual,
                "iterations": res.iterations,
                "boundary_fraction": res.boundary_fraction,
                "bound": bound,
            }))
        }
        Task::Bounds { c_list, eigen_tol, eigen_max_iter } => bounds(&u0, &v0, c_list, *eigen_tol, *eigen_max_iter),
        Task::Threshold { a_lo, a_hi, max_bisections, max_undecided, classifier, ell_grid, eigen_tol, eigen_max_iter } => {
            let cfg = ThresholdConfig {
                solver: config.solver.clone(),
                classifier: *classifier,
                max_bisections: *max_bisections,
                max_undecided: *max_undecided,
                eigen_tol: *eigen_tol,
                eigen_max_iter: *eigen_max_iter,
            };
            let mut est = bisect_threshold(&v0, &u0, *a_lo, *a_hi, &cfg)?;
            est.v0_descriptor = serde_json::to_string(&config.data.v0)?;
            est.shape_descriptor = serde_json::to_string(&config.data.u0)?;
            let runs_dir = dir.join("runs");
            fs::create_dir(&runs_dir)?;
            for (i, series) in est.series.iter().enumerate() {
                write_series(&runs_dir.join(format!("run-{i:02}.csv")), series)?;
            }
            let curve = if ell_grid.is_empty() { None } else { Some(scan_l_curve(&v0, &[u0], ell_grid, &cfg)?) };
            Ok(json!({ "estimate": est, "l_curve": curve }))
        }
        Task::SymmetryCheck { xi, lambda } => {
            let equivariance = check_equivariance((&u0, &v0), xi, &config.solver)?;
            let su = rescale_onto_shrunk_grid(&u0, *lambda)?;
            let sv = rescale_onto_shrunk_grid(&v0, *lambda)?;
            let before = State::new(u0.clone(), v0, 0.0)?;
            let after = State::new(su.clone(), sv, 0.0)?;
            let d = grid.dim() as f64;
            let ratio = |a: f64, b: f64| if a == 0.0 { None } else { Some(b / a) };
            Ok(json!({
                "equivariance": equivariance,
                "scaling": {
                    "lambda": lambda,
                    "mass_ratio": ratio(mass(&before), mass(&after)),
                    "mass_ratio_expected": lambda.powf(4.0 - d),
                    "energy_ratio": ratio(energy(&before).energy, energy(&after).energy),
                    "energy_ratio_expected": lambda.powf(6.0 - d),
                    "fh_half_ratio": ratio(fh_half_norm(&u0), fh_half_norm(&su)),
                    "fh_half_ratio_expected": lambda.powf(0.5 * (3.0 - d)),
                },
            }))
        }
    }
}

/// The energy-sign, eigenvalue and large-data bounds; a bound that cannot be evaluated is
/// listed under `not_evaluated` with the reason.
fn bounds(u0: &Field, v0: &Field, c_list: &[f64], tol: f64, max_iter: usize) -> Result<Value> {
    let mut reports = vec![energy_sign_bound(u0, v0)?];
    let mut not_evaluated = Vec::new();
    let mut skip = |kind: BoundKind, e: qnls_core::Error| {
        not_evaluated.push(json!({ "kind": kind, "error": e.kind(), "message": e.to_string() }))
    };
    match theta_scan(v0, tol, max_iter).and_then(|res| eigenvalue_bound(v0, &res)) {
        Ok(r) => reports.push(r),
        Err(e) => skip(BoundKind::Eigenvalue, e),
    }
    let mut large_data = None;
    match large_data_parts(v0) {
        Ok(parts) => {
            large_data = Some(parts);
            // The bound grows like √c, so the smallest firing c gives the sharpest one.
            if let Some(first) = large_data_bound(v0, c_list)?.into_iter().next() {
                reports.push(first);
            }
        }
        Err(e) => skip(BoundKind::LargeData, e),
    }
    let best = reports.iter().filter_map(|r| r.bound_value).reduce(f64::min);
    Ok(json!({
        "reports": reports,
        "not_evaluated": not_evaluated,
        "large_data": large_data,
        "best_bound": best,
    }))
}
