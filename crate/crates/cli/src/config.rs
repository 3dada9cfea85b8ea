//! Run configurations: parsing, defaults and validation.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use stochom::convergence::Source;
use stochom::maxwell::MediumSpec;
use stochom::medium::{fixture, DiffeomorphismSpec, FieldSpec, FixtureOptions};

/// A configuration problem, located by the dotted path of the offending
/// field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Workflow {
    Inspect,
    Homogenize,
    Converge,
    Maxwell,
}

impl Workflow {
    pub fn name(self) -> &'static str {
        match self {
            Workflow::Inspect => "inspect",
            Workflow::Homogenize => "homogenize",
            Workflow::Converge => "converge",
            Workflow::Maxwell => "maxwell",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

/// Where the medium comes from. A string is a fixture name, or a path when it
/// ends in `.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MediumRef {
    Name(String),
    Fixture {
        fixture: String,
        #[serde(default)]
        options: FixtureOptions,
    },
    Field(FieldSpec),
    Dispersive(MediumSpec),
}

/// Built-in dispersive media for the `maxwell` workflow.
pub const MAXWELL_FIXTURES: [&str; 2] = ["decoupled", "debye-laminate"];

fn maxwell_fixture(name: &str) -> Option<MediumSpec> {
    match name {
        "decoupled" => Some(MediumSpec::isotropic(2.0, 1.0)),
        "debye-laminate" => Some(MediumSpec::debye_laminate(1.0)),
        _ => None,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    /// Supercell side `N`.
    #[serde(default, alias = "N", skip_serializing_if = "Option::is_none")]
    pub supercell_size: Option<usize>,
    /// Mesh size; `1/h` must be an integer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Number of realizations `R`.
    #[serde(default, alias = "R", skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells_per_period: Option<usize>,
    /// Laplace points as `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_list: Option<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workflow: Option<Workflow>,
    pub medium: MediumRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffeo: Option<DiffeomorphismSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    /// Right-hand side of the `converge` workflow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub workflow: Option<Workflow>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Parses a configuration, naming the offending field on failure.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = if path == "." || path.is_empty() {
            "(root)".to_string()
        } else {
            path
        };
        ConfigError::new(field, inner.to_string())
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    // medium paths are relative to the configuration file
    if let MediumRef::Name(name) = &cfg.medium {
        if name.ends_with(".json") {
            let p = Path::new(name);
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.medium = MediumRef::Name(dir.join(p).to_string_lossy().into_owned());
                }
            }
        }
    }
    Ok(cfg)
}

/// The medium after fixture lookup and file loading.
#[derive(Debug, Clone, PartialEq)]
pub enum Medium {
    Field(FieldSpec),
    Dispersive(MediumSpec),
}

impl Medium {
    pub fn dim(&self) -> usize {
        match self {
            Medium::Field(f) => f.dim,
            Medium::Dispersive(_) => 3,
        }
    }
}

fn resolve_medium(medium: &MediumRef, workflow: Workflow) -> Result<Medium, ConfigError> {
    let bad = |msg: String| ConfigError::new("medium", msg);
    let m = match medium {
        MediumRef::Name(name) if name.ends_with(".json") => {
            let text = std::fs::read_to_string(name).map_err(|e| bad(format!("cannot read {name}: {e}")))?;
            let inner: MediumRef = serde_json::from_str(&text).map_err(|e| bad(format!("{name}: {e}")))?;
            if matches!(inner, MediumRef::Name(_)) {
                return Err(bad(format!("{name} must hold a medium description, not a name")));
            }
            return resolve_medium(&inner, workflow);
        }
        MediumRef::Name(name) => {
            if workflow == Workflow::Maxwell || maxwell_fixture(name).is_some() {
                match maxwell_fixture(name) {
                    Some(spec) => Medium::Dispersive(spec),
                    None => {
                        return Err(bad(format!(
                            "unknown dispersive fixture '{name}' (expected one of {MAXWELL_FIXTURES:?})"
                        )))
                    }
                }
            } else {
                Medium::Field(fixture(name, &FixtureOptions::default()).map_err(|e| bad(e.to_string()))?)
            }
        }
        MediumRef::Fixture { fixture: name, options } => {
            Medium::Field(fixture(name, options).map_err(|e| bad(e.to_string()))?)
        }
        MediumRef::Field(f) => Medium::Field(f.clone()),
        MediumRef::Dispersive(d) => Medium::Dispersive(d.clone()),
    };
    match (&m, workflow) {
        (Medium::Field(_), Workflow::Maxwell) => Err(bad("the maxwell workflow needs a dispersive medium".into())),
        (Medium::Dispersive(_), Workflow::Homogenize | Workflow::Converge) => Err(bad(format!(
            "the {} workflow needs a real coefficient field",
            workflow.name()
        ))),
        _ => Ok(m),
    }
}

/// A configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub workflow: Workflow,
    /// The medium as used, with fixtures and files expanded.
    pub medium: MediumRef,
    pub diffeo: DiffeomorphismSpec,
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    pub output: PathBuf,
    pub format: Format,
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be positive and finite (got {v})")))
    }
}

fn at_least_one(field: &str, v: usize) -> Result<(), ConfigError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(ConfigError::new(field, "must be at least 1"))
    }
}

impl RunConfig {
    /// Applies overrides and defaults and checks the workflow's required
    /// fields.
    pub fn resolve(&self, over: &Overrides) -> Result<(ResolvedConfig, Medium), ConfigError> {
        let workflow = match (over.workflow, self.workflow) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError::new(
                    "workflow",
                    format!("config declares '{}' but '{}' was requested", b.name(), a.name()),
                ))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(ConfigError::new("workflow", "missing (give a subcommand or the field)")),
        };
        let medium = resolve_medium(&self.medium, workflow)?;
        let dim = medium.dim();
        let diffeo = self.diffeo.clone().unwrap_or_else(|| DiffeomorphismSpec::identity(dim));
        if diffeo.dim != dim {
            return Err(ConfigError::new(
                "diffeo.dim",
                format!("medium has dimension {dim}, diffeomorphism has {}", diffeo.dim),
            ));
        }
        diffeo.validate().map_err(|e| ConfigError::new("diffeo", e.to_string()))?;

        let n = &self.numerics;
        let mut num = Numerics {
            supercell_size: Some(n.supercell_size.unwrap_or(4)),
            h: Some(n.h.unwrap_or(0.125)),
            theta: Some(n.theta.unwrap_or(0.0)),
            realizations: Some(n.realizations.unwrap_or(8)),
            tol: Some(n.tol.unwrap_or(1e-10)),
            seed: Some(over.seed.or(n.seed).unwrap_or(0)),
            quadrature_order: Some(n.quadrature_order.unwrap_or(3)),
            max_iter: n.max_iter,
            epsilons: n.epsilons.clone(),
            cells_per_period: n.cells_per_period,
            p_list: n.p_list.clone(),
        };
        at_least_one("numerics.supercell_size", num.supercell_size.unwrap())?;
        at_least_one("numerics.realizations", num.realizations.unwrap())?;
        at_least_one("numerics.quadrature_order", num.quadrature_order.unwrap())?;
        positive("numerics.h", num.h.unwrap())?;
        positive("numerics.tol", num.tol.unwrap())?;
        let theta = num.theta.unwrap();
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(ConfigError::new("numerics.theta", format!("must be finite and ≥ 0 (got {theta})")));
        }
        cells_per_unit(num.h.unwrap())?;
        if let Some(it) = num.max_iter {
            at_least_one("numerics.max_iter", it)?;
        }

        let mut source = None;
        match workflow {
            Workflow::Converge => {
                let eps = num
                    .epsilons
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("numerics.epsilons", "required by the converge workflow"))?;
                if eps.is_empty() {
                    return Err(ConfigError::new("numerics.epsilons", "must not be empty"));
                }
                for (k, e) in eps.iter().enumerate() {
                    positive(&format!("numerics.epsilons[{k}]"), *e)?;
                    if k > 0 && !(*e < eps[k - 1]) {
                        return Err(ConfigError::new(
                            format!("numerics.epsilons[{k}]"),
                            "epsilons must be strictly decreasing",
                        ));
                    }
                }
                let cpp = num.cells_per_period.unwrap_or(8);
                if cpp < 8 {
                    return Err(ConfigError::new("numerics.cells_per_period", "must be at least 8"));
                }
                num.cells_per_period = Some(cpp);
                let m = match &medium {
                    Medium::Field(f) => f.components,
                    Medium::Dispersive(_) => 2,
                };
                let src = self.source.clone().unwrap_or(Source::Constant { value: vec![1.0; m] });
                if src.components() != m {
                    return Err(ConfigError::new(
                        "source",
                        format!("has {} components, medium has {m}", src.components()),
                    ));
                }
                source = Some(src);
            }
            Workflow::Maxwell => {
                let ps = num
                    .p_list
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("numerics.p_list", "required by the maxwell workflow"))?;
                if ps.is_empty() {
                    return Err(ConfigError::new("numerics.p_list", "must not be empty"));
                }
                for (k, p) in ps.iter().enumerate() {
                    if !(p.re > 0.0 && p.re.is_finite() && p.im.is_finite()) {
                        return Err(ConfigError::new(
                            format!("numerics.p_list[{k}]"),
                            format!("Laplace points need Re p > 0 (got {p})"),
                        ));
                    }
                }
            }
            Workflow::Inspect | Workflow::Homogenize => {}
        }

        let medium_ref = match &medium {
            Medium::Field(f) => MediumRef::Field(f.clone()),
            Medium::Dispersive(d) => MediumRef::Dispersive(d.clone()),
        };
        let resolved = ResolvedConfig {
            workflow,
            medium: medium_ref,
            diffeo,
            numerics: num,
            source,
            output: over
                .output
                .clone()
                .or_else(|| self.output.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            format: over.format.or(self.format).unwrap_or_default(),
        };
        Ok((resolved, medium))
    }
}

/// `1/h` as an integer.
pub fn cells_per_unit(h: f64) -> Result<usize, ConfigError> {
    let v = 1.0 / h;
    let r = v.round();
    if r < 1.0 || (v - r).abs() > 1e-9 * v {
        return Err(ConfigError::new("numerics.h", format!("1/h must be an integer (got 1/h = {v})")));
    }
    Ok(r as usize)
}
