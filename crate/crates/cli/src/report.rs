//! Error reports and output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, ResolvedConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error in {}", .0.field)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] stochom::Error),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// Structured JSON report of the failure.
    pub fn report(&self) -> Value {
        match self {
            CliError::Config(e) => json!({
                "status": "error",
                "kind": "config",
                "field": e.field,
                "message": e.message,
            }),
            CliError::Io { path, message } => json!({
                "status": "error",
                "kind": "io",
                "path": path,
                "message": message,
            }),
            CliError::Numeric(e) => {
                use stochom::Error as E;
                let (kind, details) = match e {
                    E::InvalidSpec(_) => ("invalid-spec", json!({})),
                    E::IterationLimit { iterations, residual } => (
                        "iteration-limit",
                        json!({ "iterations": iterations, "residual": residual }),
                    ),
                    E::SingularMean { det } => ("singular-mean", json!({ "det": det })),
                    E::NonFiniteCoefficient { point } => ("non-finite-coefficient", json!({ "point": point })),
                    E::NoConvergence { iterations, residual } => (
                        "no-convergence",
                        json!({ "iterations": iterations, "residual": residual }),
                    ),
                    E::NonElliptic { point, eigenvalue } => (
                        "non-elliptic",
                        json!({ "point": point, "eigenvalue": eigenvalue }),
                    ),
                    E::NonDissipative { point, p, eigenvalue } => (
                        "non-dissipative",
                        json!({ "point": point, "p": p, "eigenvalue": eigenvalue }),
                    ),
                    E::UnresolvedScale { h, limit } => ("unresolved-scale", json!({ "h": h, "limit": limit })),
                    E::SupercellTooSmall { required, available } => (
                        "supercell-too-small",
                        json!({ "required": required, "available": available }),
                    ),
                    E::Dimension(_) => ("dimension", json!({})),
                    E::Io(_) => ("io", json!({})),
                };
                json!({
                    "status": "error",
                    "kind": kind,
                    "message": e.to_string(),
                    "details": details,
                })
            }
        }
    }
}

/// Envelope shared by every JSON output: the resolved configuration and the
/// seeds next to the result.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub workflow: &'static str,
    pub config: &'a ResolvedConfig,
    pub seeds: Value,
    pub result: T,
}

/// Collects the files of one run.
pub struct OutputDir {
    pub root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(&self.root.join(name), e))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// CSV preceded by `#` comment lines holding the configuration and seeds.
    pub fn write_csv(
        &mut self,
        name: &str,
        config: &ResolvedConfig,
        seeds: &Value,
        table: &str,
    ) -> Result<(), CliError> {
        let cfg = serde_json::to_string(config).map_err(|e| CliError::io(&self.root.join(name), e))?;
        let text = format!("# config: {cfg}\n# seeds: {seeds}\n{table}");
        self.write(name, &text)
    }
}
