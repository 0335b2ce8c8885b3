//! Config-driven runner for the quadratic Schrödinger laboratory.

pub mod config;
pub mod data;
pub mod error;
pub mod run;

pub use config::{load_config, FieldSpec, RunConfig, Task, SCHEMA_VERSION};
pub use data::build_data;
pub use error::{CliError, Result};
pub use run::{execute, RunInfo};
