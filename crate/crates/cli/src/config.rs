//! Run configuration.
//!
//! A config is a TOML document with the blocks `grid`, `solver`, `data` and `task` plus an
//! optional integer `seed`. Relative file paths are resolved against the directory of the
//! config file. See the README for the full key schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qnls_core::dynamics::SolverConfig;
use qnls_core::grid::{make_grid, Grid};
use qnls_core::symmetry::Gaussian;
use qnls_core::threshold::ClassifierConfig;

use crate::error::{CliError, Result};

/// Version of the JSON written to `summary.json` and of the error JSON.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Reserved for randomized options; no current task draws random numbers.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub data: DataConfig,
    pub task: Task,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Ok(make_grid(self.dim, self.n, self.half_width)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub u0: FieldSpec,
    #[serde(default)]
    pub v0: FieldSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Q1,
    Q2,
}

/// Initial-data family.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FieldSpec {
    #[default]
    Zero,
    /// `amplitude e^{i phase} e^{-|x - center|² / (2 width²)} e^{i boost·x}`.
    Gaussian(Gaussian),
    /// `scale · Q_which` for the ground state at frequency `omega`.
    GroundStateComponent {
        omega: f64,
        which: Component,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "default_gs_tol")]
        tol: f64,
        #[serde(default = "default_gs_iter")]
        max_iter: usize,
    },
    /// Binary field file, on the same grid as the config.
    FileRef { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

fn default_gs_tol() -> f64 {
    1e-10
}

fn default_gs_iter() -> usize {
    2000
}

fn default_eigen_tol() -> f64 {
    1e-9
}

fn default_eigen_iter() -> usize {
    500
}

fn default_true() -> bool {
    true
}

fn default_c_list() -> Vec<f64> {
    (-16..=48).map(|j| 2f64.powf(j as f64 / 4.0)).collect()
}

fn default_max_bisections() -> usize {
    8
}

fn default_max_undecided() -> usize {
    3
}

fn default_lambda() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    /// Evolve `(u0, v0)` over `[0, solver.t_end]`.
    Simulate {
        #[serde(default = "default_true")]
        save_final: bool,
    },
    /// Ground state at frequency `omega`; ignores `data`.
    Groundstate {
        omega: f64,
        #[serde(default = "default_gs_tol")]
        tol: f64,
        #[serde(default = "default_gs_iter")]
        max_iter: usize,
    },
    /// Lowest eigenpair of `-Δ - 2 Re(e^{iθ} v0)`; scans θ when `theta` is absent.
    Eigen {
        theta: Option<f64>,
        #[serde(default = "default_eigen_tol")]
        tol: f64,
        #[serde(default = "default_eigen_iter")]
        max_iter: usize,
    },
    /// All three analytic non-scattering bounds for `(u0, v0)`.
    Bounds {
        #[serde(default = "default_c_list")]
        c_list: Vec<f64>,
        #[serde(default = "default_eigen_tol")]
        eigen_tol: f64,
        #[serde(default = "default_eigen_iter")]
        eigen_max_iter: usize,
    },
    /// Bisection on the amplitude of `u0`, used as the profile direction, with `v0` fixed.
    Threshold {
        a_lo: f64,
        a_hi: f64,
        #[serde(default = "default_max_bisections")]
        max_bisections: usize,
        #[serde(default = "default_max_undecided")]
        max_undecided: usize,
        #[serde(default)]
        classifier: ClassifierConfig,
        /// Optional amplitudes for an `L(ℓ)` scan along the same profile.
        #[serde(default)]
        ell_grid: Vec<f64>,
        #[serde(default = "default_eigen_tol")]
        eigen_tol: f64,
        #[serde(default = "default_eigen_iter")]
        eigen_max_iter: usize,
    },
    /// Galilean equivariance at boost `xi` and scaling laws at `lambda`.
    SymmetryCheck {
        xi: Vec<f64>,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
}

impl Task {
    /// Subcommand name, also the prefix of the run directory.
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate { .. } => "simulate",
            Task::Groundstate { .. } => "groundstate",
            Task::Eigen { .. } => "eigen",
            Task::Bounds { .. } => "bounds",
            Task::Threshold { .. } => "threshold",
            Task::SymmetryCheck { .. } => "symmetry-check",
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        let grid = self.grid.build()?;
        self.solver.validate()?;
        for spec in [&self.data.u0, &self.data.v0] {
            match spec {
                FieldSpec::Zero => {}
                FieldSpec::Gaussian(g) => g.validate(grid.dim())?,
                FieldSpec::GroundStateComponent { omega, scale, tol, .. } => {
                    if !(*omega > 0.0 && omega.is_finite() && scale.is_finite() && *tol > 0.0) {
                        return Err(invalid("ground state component needs omega > 0, finite scale, tol > 0"));
                    }
                }
                FieldSpec::FileRef { path } => {
                    let full = base_dir.join(path);
                    if !full.is_file() {
                        return Err(invalid(format!("data file {} does not exist", full.display())));
                    }
                }
            }
        }
        match &self.task {
            Task::Groundstate { omega, tol, .. } if !(*omega > 0.0 && *tol > 0.0) => {
                Err(invalid("groundstate needs omega > 0 and tol > 0"))
            }
            Task::Bounds { c_list, .. } if c_list.iter().any(|&c| !(c > 0.0 && c.is_finite())) => {
                Err(invalid("bounds c_list entries must be positive"))
            }
            Task::Threshold { a_lo, a_hi, classifier, ell_grid, .. } => {
                classifier.validate()?;
                if !(0.0 <= *a_lo && a_lo < a_hi) {
                    return Err(invalid("threshold needs 0 <= a_lo < a_hi"));
                }
                if ell_grid.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
                    return Err(invalid("threshold ell_grid entries must be non-negative"));
                }
                Ok(())
            }
            Task::SymmetryCheck { xi, lambda } => {
                if xi.len() != grid.dim() {
                    return Err(invalid(format!("xi needs {} components", grid.dim())));
                }
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(invalid("lambda must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Files the run reads, in a fixed order.
    pub fn referenced_files(&self, base_dir: &Path) -> Vec<PathBuf> {
        [&self.data.u0, &self.data.v0]
            .into_iter()
            .filter_map(|s| match s {
                FieldSpec::FileRef { path } => Some(base_dir.join(path)),
                _ => None,
            })
            .collect()
    }

    /// Canonical JSON: `serde_json` objects keep keys sorted, so equal configs give equal text.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_value(self)?.to_string())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON and the referenced file contents.
    pub fn hash(&self, base_dir: &Path) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json()?.as_bytes());
        for path in self.referenced_files(base_dir) {
            hasher.update(std::fs::read(&path)?);
        }
        Ok(hex::encode(hasher.finalize())[..16].to_string())
    }
}

/// Apply `a.b.c=value` overrides, where `value` is a TOML value (`64`, `1e-3`, `"q2"`, ...).
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| invalid(format!("override `{item}` is not KEY=VALUE")))?;
        let value = match format!("v = {raw}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let parts: Vec<&str> = key.trim().split('.').collect();
        let (last, parents) = parts.split_last().expect("split yields one part");
        let mut node = &mut *table;
        for p in parents {
            node = node
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| invalid(format!("override `{key}`: `{p}` is not a table")))?;
        }
        node.insert(last.to_string(), value);
    }
    Ok(())
}

/// Parse, override and validate a config; returns it with the directory for relative paths.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<(RunConfig, String, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig { path: path.to_path_buf(), source })?;
    let mut table: toml::Table = toml::from_str(&text)?;
    apply_overrides(&mut table, overrides)?;
    let config: RunConfig = toml::Value::Table(table).try_into()?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.validate(&base_dir)?;
    Ok((config, text, base_dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [grid]
        dim = 3
        n = 16
        half_width = 8.0

        [data.v0]
        family = "gaussian"
        amplitude = 1.0
        width = 1.0

        [task]
        kind = "simulate"
    "#;

    fn parse(text: &str) -> RunConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse(MINIMAL);
        assert_eq!(c.data.u0, FieldSpec::Zero);
        assert_eq!(c.data.v0, FieldSpec::Gaussian(Gaussian::new(1.0, 1.0)));
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.task, Task::Simulate { save_final: true });
        assert!(c.validate(Path::new(".")).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("width = 1.0", "width = 1.0\nwidht = 2.0");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = parse(MINIMAL);
        let b = parse(&MINIMAL.replace("half_width = 8.0", "half_width   =   8.0 # same"));
        let c = parse(&MINIMAL.replace("half_width = 8.0", "half_width = 9.0"));
        let dir = Path::new(".");
        assert_eq!(a.hash(dir).unwrap(), b.hash(dir).unwrap());
        assert_ne!(a.hash(dir).unwrap(), c.hash(dir).unwrap());
        assert_eq!(a.hash(dir).unwrap().len(), 16);
    }

    #[test]
    fn overrides_set_nested_values() {
        let mut table: toml::Table = toml::from_str(MINIMAL).unwrap();
        apply_overrides(&mut table, &["grid.n=32".into(), "solver.dt=0.5e-3".into(), "task.save_final=false".into()])
            .unwrap();
        let c: RunConfig = toml::Value::Table(table).try_into().unwrap();
        assert_eq!(c.grid.n, 32);
        assert_eq!(c.solver.dt, 0.5e-3);
        assert_eq!(c.task, Task::Simulate { save_final: false });
    }

    #[test]
    fn symmetry_check_needs_full_boost() {
        let text = MINIMAL.replace("kind = \"simulate\"", "kind = \"symmetry-check\"\nxi = [1.0]");
        let err = parse(&text).validate(Path::new(".")).unwrap_err();
        assert_eq!(err.kind(), "config");
    }
}
