//! Batch front-end of the `stochom` engine: run configurations, the
//! `inspect`, `homogenize`, `converge` and `maxwell` workflows, and their
//! output files.

pub mod config;
pub mod report;
pub mod workflows;

use std::path::Path;

pub use config::{
    load_config, parse_config, ConfigError, Format, Medium, MediumRef, Numerics, Overrides, ResolvedConfig, RunConfig,
    Workflow,
};
pub use report::CliError;
pub use workflows::{inspect, run, RunOutcome};

/// Loads, resolves and runs a configuration file.
pub fn run_file(path: &Path, over: &Overrides) -> Result<RunOutcome, CliError> {
    let cfg = load_config(path)?;
    let (resolved, medium) = cfg.resolve(over)?;
    run(&resolved, &medium)
}
