//! Serializable field descriptions and the built-in named fixtures.

use serde::{Deserialize, Serialize};

use super::coefficient::{check_ellipticity, default_sampling, CoefficientField};
use super::profile::{ScalarProfile, TrigMode};
use crate::error::{Error, Result};

/// One term `profile(y) · T` of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTerm {
    pub profile: ScalarProfile,
    /// Row-major `(md)×(md)` flux matrix (see [`super::coefficient`]).
    pub tensor: Vec<f64>,
}

/// JSON description of a real periodic coefficient field
/// `A(y) = Σ_t profile_t(y) T_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub dim: usize,
    pub components: usize,
    pub terms: Vec<FieldTerm>,
    #[serde(default)]
    pub description: String,
}

impl FieldSpec {
    /// `profile(y)` times the identity on `R^{md}`.
    pub fn isotropic(dim: usize, components: usize, profile: ScalarProfile) -> Self {
        Self {
            dim,
            components,
            terms: vec![FieldTerm {
                profile,
                tensor: identity(dim * components),
            }],
            description: String::new(),
        }
    }

    pub fn constant(dim: usize, components: usize, tensor: Vec<f64>) -> Self {
        Self {
            dim,
            components,
            terms: vec![FieldTerm {
                profile: ScalarProfile::Constant { value: 1.0 },
                tensor,
            }],
            description: "constant".into(),
        }
    }

    pub fn with_description(mut self, text: impl Into<String>) -> Self {
        self.description = text.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidSpec(format!("dim must be 1, 2 or 3 (got {})", self.dim)));
        }
        if self.components == 0 {
            return Err(Error::InvalidSpec("components must be at least 1".into()));
        }
        if self.terms.is_empty() {
            return Err(Error::InvalidSpec("field has no terms".into()));
        }
        let n = self.dim * self.components;
        for (k, term) in self.terms.iter().enumerate() {
            if term.tensor.len() != n * n {
                return Err(Error::InvalidSpec(format!(
                    "terms[{k}].tensor has {} entries, expected {}",
                    term.tensor.len(),
                    n * n
                )));
            }
            if term.tensor.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("terms[{k}].tensor is not finite")));
            }
            let axis = match &term.profile {
                ScalarProfile::Cosine { axis, .. }
                | ScalarProfile::InverseCosine { axis, .. }
                | ScalarProfile::TwoPhase { axis, .. } => Some(*axis),
                _ => None,
            };
            if axis.is_some_and(|a| a >= self.dim) {
                return Err(Error::InvalidSpec(format!("terms[{k}].profile.axis out of range")));
            }
        }
        Ok(())
    }

    /// Validates, builds and checks ellipticity on a sample grid.
    pub fn build(&self) -> Result<TermField> {
        self.validate()?;
        let mut field = TermField {
            spec: self.clone(),
            ellipticity: 0.0,
        };
        field.ellipticity = check_ellipticity(&field, default_sampling(self.dim))?;
        Ok(field)
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for k in 0..n {
        t[k * n + k] = 1.0;
    }
    t
}

/// Field built from a [`FieldSpec`].
#[derive(Debug, Clone)]
pub struct TermField {
    spec: FieldSpec,
    ellipticity: f64,
}

impl TermField {
    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }
}

impl CoefficientField<f64> for TermField {
    fn dim(&self) -> usize {
        self.spec.dim
    }
    fn components(&self) -> usize {
        self.spec.components
    }
    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for term in &self.spec.terms {
            let s = term.profile.eval(y);
            for (o, t) in out.iter_mut().zip(&term.tensor) {
                *o += s * t;
            }
        }
    }
    fn ellipticity_constant(&self) -> f64 {
        self.ellipticity
    }
    fn description(&self) -> String {
        self.spec.description.clone()
    }
}

/// Knobs for the named fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureOptions {
    /// Spatial dimension for fixtures that support several.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub components: Option<usize>,
    /// Width of the smoothing ramp of discontinuous fixtures (typically 2h).
    #[serde(default)]
    pub ramp_width: f64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            dim: None,
            components: None,
            ramp_width: 0.0,
        }
    }
}

pub const FIXTURE_NAMES: [&str; 5] = [
    "constant",
    "laminate1d",
    "laminate2d",
    "smooth-trig",
    "two-phase-smoothed",
];

/// Symmetric positive definite `n×n` matrix used by the constant fixture.
pub fn reference_constant_tensor(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            t[r * n + c] = if r == c {
                2.0 + 0.25 * r as f64
            } else {
                0.3 / (1.0 + (r + c) as f64)
            };
        }
    }
    t
}

/// Built-in fixture by name.
///
/// * `constant` — constant SPD tensor, any `d`, `m`.
/// * `laminate1d` — `d = 1`, two-phase `a ∈ {1, 4}` half and half.
/// * `laminate2d` — `d = 2`, `a(y₁) ∈ {1, 4}` times the identity.
/// * `smooth-trig` — smooth isotropic trigonometric medium.
/// * `two-phase-smoothed` — stiff ball inclusion (`5` in `1`).
pub fn fixture(name: &str, opts: &FixtureOptions) -> Result<FieldSpec> {
    let m = opts.components.unwrap_or(1);
    let laminate = |dim: usize| {
        FieldSpec::isotropic(
            dim,
            m,
            ScalarProfile::TwoPhase {
                first: 1.0,
                second: 4.0,
                axis: 0,
                ramp_width: opts.ramp_width,
            },
        )
    };
    let spec = match name {
        "constant" => {
            let d = opts.dim.unwrap_or(2);
            FieldSpec::constant(d, m, reference_constant_tensor(d * m))
        }
        "laminate1d" => laminate(1).with_description("two-phase laminate {1,4}, d=1"),
        "laminate2d" => laminate(opts.dim.unwrap_or(2)).with_description("two-phase laminate {1,4} along y1"),
        "smooth-trig" => {
            let d = opts.dim.unwrap_or(2);
            let mut modes = vec![TrigMode {
                amplitude: 0.6,
                wave: vec![1],
                phase: 0.0,
            }];
            if d >= 2 {
                modes.push(TrigMode {
                    amplitude: 0.5,
                    wave: vec![0, 1],
                    phase: 0.3,
                });
                modes.push(TrigMode {
                    amplitude: 0.3,
                    wave: vec![1, 1],
                    phase: 0.4,
                });
            }
            if d >= 3 {
                modes.push(TrigMode {
                    amplitude: 0.2,
                    wave: vec![0, 1, 1],
                    phase: 1.1,
                });
            }
            FieldSpec::isotropic(d, m, ScalarProfile::Trig { mean: 2.0, modes })
                .with_description("smooth trigonometric medium")
        }
        "two-phase-smoothed" => FieldSpec::isotropic(
            opts.dim.unwrap_or(2),
            m,
            ScalarProfile::Inclusion {
                inside: 5.0,
                outside: 1.0,
                radius: 0.3,
                ramp_width: opts.ramp_width.max(1e-3),
            },
        )
        .with_description("smoothed ball inclusion 5 in 1"),
        other => {
            return Err(Error::InvalidSpec(format!(
                "unknown fixture '{other}' (expected one of {FIXTURE_NAMES:?})"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_builds_and_is_periodic() {
        let opts = FixtureOptions {
            ramp_width: 1.0 / 32.0,
            ..Default::default()
        };
        // deterministic pseudo-random sample points
        let mut state = 0x1234_5678_9abc_def0_u64;
        let mut next = || {
            state = crate::stats::derive_seed(state, 1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for name in FIXTURE_NAMES {
            let field = fixture(name, &opts).unwrap().build().unwrap();
            assert!(field.ellipticity_constant() > 0.0, "{name}");
            let d = field.dim();
            for _ in 0..1000 {
                let y: Vec<f64> = (0..d).map(|_| next()).collect();
                let shift: Vec<f64> = (0..d).map(|_| (next() * 10.0).floor() - 5.0).collect();
                let ys: Vec<f64> = y.iter().zip(&shift).map(|(a, b)| a + b).collect();
                let a = field.eval(&y);
                let b = field.eval(&ys);
                for (u, v) in a.data.iter().zip(&b.data) {
                    // y + k is rounded, so compare with a tolerance scaled by
                    // the profile slope times the rounding error
                    assert!((u - v).abs() <= 1e-10, "{name}: {u} vs {v}");
                }
                assert!(a.data.iter().all(|v| v.is_finite() && v.abs() < 1e3));
            }
        }
    }

    #[test]
    fn unknown_fixture_is_rejected() {
        assert!(matches!(
            fixture("nope", &FixtureOptions::default()),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn wrong_tensor_size_is_rejected() {
        let spec = FieldSpec::constant(2, 1, vec![1.0; 3]);
        assert!(spec.build().is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = fixture("smooth-trig", &FixtureOptions::default()).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: FieldSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
