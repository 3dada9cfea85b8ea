//! Dispersive bianisotropic media and the Laplace-domain coefficient
//! `Ã(y,p) = A₀(y) + Â_d(y,p)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{check_ellipticity, default_sampling, hermitian_part_min_eigenvalue, CoefTensor, CoefficientField, ScalarProfile};

/// One of the four 3×3 blocks of the 6×6 constitutive matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    /// Permittivity, rows and columns on the electric side.
    Eps,
    /// Electric row, magnetic column.
    Xi,
    /// Magnetic row, electric column.
    Zeta,
    /// Permeability.
    Mu,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::Eps, Block::Xi, Block::Zeta, Block::Mu];

    /// `(row, column)` block offsets inside the 6×6 matrix.
    pub fn offsets(self) -> (usize, usize) {
        match self {
            Block::Eps => (0, 0),
            Block::Xi => (0, 3),
            Block::Zeta => (3, 0),
            Block::Mu => (3, 3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::Eps => "eps",
            Block::Xi => "xi",
            Block::Zeta => "zeta",
            Block::Mu => "mu",
        }
    }
}

fn unit_profile() -> ScalarProfile {
    ScalarProfile::Constant { value: 1.0 }
}

/// Static term `profile(y) · matrix` placed in one block of `A₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTerm {
    pub block: Block,
    #[serde(default = "unit_profile")]
    pub profile: ScalarProfile,
    pub matrix: [[f64; 3]; 3],
}

/// Laplace transforms of the supported memory kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `e^{−t/τ}` ↦ `τ / (1 + pτ)`.
    Debye { tau: f64 },
    /// Damped oscillator ↦ `ω_p² / (p² + γp + ω₀²)`.
    Lorentz {
        plasma: f64,
        damping: f64,
        resonance: f64,
    },
}

impl KernelFamily {
    pub fn transform(&self, p: Complex64) -> Complex64 {
        match *self {
            KernelFamily::Debye { tau } => tau / (1.0 + p * tau),
            KernelFamily::Lorentz {
                plasma,
                damping,
                resonance,
            } => plasma * plasma / (p * p + damping * p + resonance * resonance),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let ok = match *self {
            KernelFamily::Debye { tau } => tau.is_finite() && tau > 0.0,
            KernelFamily::Lorentz {
                plasma,
                damping,
                resonance,
            } => plasma.is_finite() && damping.is_finite() && damping >= 0.0 && resonance.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid kernel parameters {self:?}"))
        }
    }
}

/// Dispersive term `profile(y) · matrix · K̂(p)` in one block of `Â_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub block: Block,
    #[serde(flatten)]
    pub family: KernelFamily,
    #[serde(default = "unit_profile")]
    pub profile: ScalarProfile,
    pub matrix: [[f64; 3]; 3],
}

/// JSON description of a dispersive medium on the unit period cell of `R³`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    #[serde(default)]
    pub description: String,
    pub blocks: Vec<BlockTerm>,
    #[serde(default)]
    pub kernels: Vec<KernelTerm>,
}

fn diagonal(value: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (k, row) in m.iter_mut().enumerate() {
        row[k] = value;
    }
    m
}

impl MediumSpec {
    /// `A₀ = diag(ε I, μ I)` without dispersion.
    pub fn isotropic(eps: f64, mu: f64) -> Self {
        Self {
            description: format!("constant diag({eps} I, {mu} I)"),
            blocks: vec![
                BlockTerm {
                    block: Block::Eps,
                    profile: unit_profile(),
                    matrix: diagonal(eps),
                },
                BlockTerm {
                    block: Block::Mu,
                    profile: unit_profile(),
                    matrix: diagonal(mu),
                },
            ],
            kernels: Vec::new(),
        }
    }

    /// Laminate in `y₁` with `ε̃ = I + χ(y₁) τ/(1+pτ) I`, `χ = 2 + 1.5 cos 2πy₁`,
    /// `μ̃ = I` and no coupling.
    pub fn debye_laminate(tau: f64) -> Self {
        let mut spec = Self::isotropic(1.0, 1.0);
        spec.description = "Debye laminate along y1".into();
        spec.kernels.push(KernelTerm {
            block: Block::Eps,
            family: KernelFamily::Debye { tau },
            profile: ScalarProfile::Cosine {
                mean: 2.0,
                amplitude: 1.5,
                axis: 0,
            },
            matrix: diagonal(1.0),
        });
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidSpec("medium has no static blocks".into()));
        }
        let check_profile = |what: String, p: &ScalarProfile| -> Result<()> {
            let axis = match p {
                ScalarProfile::Cosine { axis, .. }
                | ScalarProfile::InverseCosine { axis, .. }
                | ScalarProfile::TwoPhase { axis, .. } => Some(*axis),
                _ => None,
            };
            if axis.is_some_and(|a| a >= 3) {
                return Err(Error::InvalidSpec(format!("{what}.profile.axis out of range")));
            }
            Ok(())
        };
        for (k, t) in self.blocks.iter().enumerate() {
            if t.matrix.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("blocks[{k}].matrix is not finite")));
            }
            check_profile(format!("blocks[{k}]"), &t.profile)?;
        }
        for (k, t) in self.kernels.iter().enumerate() {
            if t.matrix.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("kernels[{k}].matrix is not finite")));
            }
            t.family
                .validate()
                .map_err(|e| Error::InvalidSpec(format!("kernels[{k}]: {e}")))?;
            check_profile(format!("kernels[{k}]"), &t.profile)?;
        }
        Ok(())
    }

    /// Validates and checks that `A₀` is elliptic on the sample grid.
    pub fn build(&self) -> Result<DispersiveMedium> {
        self.validate()?;
        let mut medium = DispersiveMedium {
            spec: self.clone(),
            static_ellipticity: 0.0,
        };
        medium.static_ellipticity = check_ellipticity::<f64, _>(&StaticField { medium: &medium }, default_sampling(3))?;
        Ok(medium)
    }
}

fn add_block(out: &mut [Complex64], block: Block, matrix: &[[f64; 3]; 3], weight: Complex64) {
    let (r0, c0) = block.offsets();
    for (r, row) in matrix.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[(r0 + r) * 6 + c0 + c] += weight * v;
        }
    }
}

/// Medium built from a validated [`MediumSpec`].
#[derive(Debug, Clone)]
pub struct DispersiveMedium {
    spec: MediumSpec,
    static_ellipticity: f64,
}

impl DispersiveMedium {
    pub fn spec(&self) -> &MediumSpec {
        &self.spec
    }

    /// Smallest Hermitian-part eigenvalue of `A₀` on the sample grid.
    pub fn static_ellipticity(&self) -> f64 {
        self.static_ellipticity
    }

    /// `A₀(y)` as a row-major 6×6 matrix.
    pub fn static_part(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for t in &self.spec.blocks {
            let s = t.profile.eval(y);
            let (r0, c0) = t.block.offsets();
            for (r, row) in t.matrix.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    out[(r0 + r) * 6 + c0 + c] += s * v;
                }
            }
        }
    }

    /// `Â_d(y,p)` as a row-major 6×6 matrix.
    pub fn dispersive_part(&self, y: &[f64], p: Complex64, out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for t in &self.spec.kernels {
            add_block(out, t.block, &t.matrix, t.family.transform(p) * t.profile.eval(y));
        }
    }

    /// `Ã(y,p) = A₀(y) + Â_d(y,p)`.
    pub fn tilde(&self, y: &[f64], p: Complex64, out: &mut [Complex64]) {
        self.dispersive_part(y, p, out);
        for t in &self.spec.blocks {
            add_block(out, t.block, &t.matrix, Complex64::new(t.profile.eval(y), 0.0));
        }
    }
}

struct StaticField<'a> {
    medium: &'a DispersiveMedium,
}

impl CoefficientField<f64> for StaticField<'_> {
    fn dim(&self) -> usize {
        3
    }
    fn components(&self) -> usize {
        2
    }
    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        self.medium.static_part(y, out);
    }
    fn ellipticity_constant(&self) -> f64 {
        0.0
    }
}

/// `Ã(·,p)` as a `d = 3`, `m = 2` complex coefficient field. The flux matrix
/// layout puts `(block, axis)` at index `3·block + axis`, so the 6×6 matrix
/// is used as is.
#[derive(Debug, Clone)]
pub struct TildeField<'a> {
    medium: &'a DispersiveMedium,
    p: Complex64,
    dissipativity: f64,
}

impl TildeField<'_> {
    pub fn p(&self) -> Complex64 {
        self.p
    }

    /// Smallest Hermitian-part eigenvalue seen on the sample grid.
    pub fn dissipativity(&self) -> f64 {
        self.dissipativity
    }
}

impl CoefficientField<Complex64> for TildeField<'_> {
    fn dim(&self) -> usize {
        3
    }
    fn components(&self) -> usize {
        2
    }
    fn eval_into(&self, y: &[f64], out: &mut [Complex64]) {
        self.medium.tilde(y, self.p, out);
    }
    fn ellipticity_constant(&self) -> f64 {
        self.dissipativity
    }
    fn description(&self) -> String {
        format!("{} at p = {}", self.medium.spec.description, self.p)
    }
}

pub(crate) fn check_laplace_point(p: Complex64) -> Result<()> {
    if !(p.re > 0.0) || !p.im.is_finite() || !p.re.is_finite() {
        return Err(Error::InvalidSpec(format!("Laplace point must satisfy Re p > 0 (got {p})")));
    }
    Ok(())
}

/// Builds `Ã(·,p)` and checks `Re⟨Ã(y,p)U,U⟩ ≥ c|U|²` with `c > 0` over a
/// grid of sample points `y`, for all complex `U`.
pub fn build_tilde_a(medium: &DispersiveMedium, p: Complex64) -> Result<TildeField<'_>> {
    check_laplace_point(p)?;
    let per_axis = default_sampling(3);
    let mut t = CoefTensor::<Complex64>::zeros(3, 2);
    let mut worst = f64::INFINITY;
    let mut y = [0.0; 3];
    for flat in 0..per_axis.pow(3) {
        let mut rem = flat;
        for yi in y.iter_mut() {
            *yi = ((rem % per_axis) as f64 + 0.5) / per_axis as f64;
            rem /= per_axis;
        }
        medium.tilde(&y, p, &mut t.data);
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient { point: y.to_vec() });
        }
        let ev = hermitian_part_min_eigenvalue(&t);
        if !(ev > 0.0) {
            return Err(Error::NonDissipative {
                point: y.to_vec(),
                p: p.to_string(),
                eigenvalue: ev,
            });
        }
        worst = worst.min(ev);
    }
    Ok(TildeField {
        medium,
        p,
        dissipativity: worst,
    })
}
