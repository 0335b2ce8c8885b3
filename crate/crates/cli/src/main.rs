use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use qnls_cli::{execute, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "qnls", version, about = "Numerical laboratory for the quadratic Schrödinger system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Parent directory of the run directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Override a config value, e.g. `--set grid.n=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial data and record diagnostics.
    Simulate(RunArgs),
    /// Solve for the ground state.
    Groundstate(RunArgs),
    /// Lowest eigenpair of the linearized operator built from v0.
    Eigen(RunArgs),
    /// Analytic non-scattering bounds.
    Bounds(RunArgs),
    /// Bisection on the scattering threshold.
    Threshold(RunArgs),
    /// Galilean equivariance and scaling checks.
    SymmetryCheck(RunArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Groundstate(a) => ("groundstate", a),
        Command::Eigen(a) => ("eigen", a),
        Command::Bounds(a) => ("bounds", a),
        Command::Threshold(a) => ("threshold", a),
        Command::SymmetryCheck(a) => ("symmetry-check", a),
    };
    match execute(name, &args.config, &args.out, &args.overrides) {
        Ok(info) => {
            println!("{}", json!({ "schema_version": SCHEMA_VERSION, "status": "ok", "run_dir": info.run_dir, "config_hash": info.config_hash }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!(
                "{}",
                json!({ "schema_version": SCHEMA_VERSION, "status": "error", "error": { "kind": e.kind(), "message": e.to_string() } })
            );
            ExitCode::FAILURE
        }
    }
}
