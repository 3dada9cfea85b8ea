//! Random diffeomorphisms with stationary gradient.
//!
//! A realization is `Φ(y) = L (y + Σ_k η_k b(y − k))` where `b` is the
//! separable bump `b(z) = Π 16 z_i²(1 − z_i)²` supported in the unit cell and
//! the amplitudes `η_k ∈ [−η_max, η_max]^d` are i.i.d. uniform, one per
//! lattice cell of an `N^d` supercell torus. Because `b` and `∇b` vanish on
//! the cell faces, `Φ` is C¹ and each cell is mapped onto its own image;
//! because the amplitudes are i.i.d. per cell, `∇Φ` is stationary under
//! integer shifts. Gradients are `∇Φ_{rs} = ∂Φ_r/∂y_s`.
//!
//! The displacement gradient is rank one (`η_k ⊗ ∇b`), so
//! `det ∇Φ = det L · (1 + η_k · ∇b)`.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `|β'(t)|` for `β(t) = 16 t²(1 − t)²`, attained at `t = (3 − √3)/6`.
pub const BUMP_SLOPE_MAX: f64 = 16.0 * 1.732_050_807_568_877_2 / 9.0;

const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpProfile {
    /// `Π 16 z_i²(1 − z_i)²`
    #[default]
    Polynomial,
}

impl BumpProfile {
    #[inline]
    fn factor(self, t: f64) -> (f64, f64) {
        match self {
            BumpProfile::Polynomial => {
                let s = t * (1.0 - t);
                (16.0 * s * s, 32.0 * s * (1.0 - 2.0 * t))
            }
        }
    }

    /// Value and gradient of the bump at local cell coordinates `z`.
    #[inline]
    pub fn eval(self, z: &[f64], grad: &mut [f64; 3]) -> f64 {
        let d = z.len();
        let mut vals = [1.0; 3];
        let mut ders = [0.0; 3];
        for i in 0..d {
            let (v, dv) = self.factor(z[i]);
            vals[i] = v;
            ders[i] = dv;
        }
        let mut value = 1.0;
        for v in vals.iter().take(d) {
            value *= v;
        }
        for (i, g) in grad.iter_mut().enumerate() {
            if i >= d {
                *g = 0.0;
                continue;
            }
            let mut p = ders[i];
            for (j, v) in vals.iter().enumerate().take(d) {
                if j != i {
                    p *= v;
                }
            }
            *g = p;
        }
        value
    }

    /// Upper bound for `sup_z ‖η ⊗ ∇b(z)‖₂` over `|η|_∞ ≤ 1` in dimension `d`.
    pub fn gradient_bound(self, dim: usize) -> f64 {
        match self {
            // |η|₂ ≤ √d and |∇b|₂ ≤ √d · max|β'|
            BumpProfile::Polynomial => dim as f64 * BUMP_SLOPE_MAX,
        }
    }
}

/// Law of the random diffeomorphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeomorphismSpec {
    pub dim: usize,
    #[serde(default)]
    pub bump: BumpProfile,
    pub eta_max: f64,
    /// Invertibility margin δ: requires `eta_max · sup|∇B| ≤ 1 − δ`.
    pub margin: f64,
    /// Optional linear map applied after the displacement (row-major rows).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_precompose: Option<Vec<Vec<f64>>>,
}

impl DiffeomorphismSpec {
    pub fn new(dim: usize, eta_max: f64, margin: f64) -> Self {
        Self {
            dim,
            bump: BumpProfile::Polynomial,
            eta_max,
            margin,
            linear_precompose: None,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, 0.0, 0.5)
    }

    pub fn with_linear(mut self, rows: Vec<Vec<f64>>) -> Self {
        self.linear_precompose = Some(rows);
        self
    }

    /// `sup|∇B|` in the invertibility condition.
    pub fn gradient_bound(&self) -> f64 {
        self.bump.gradient_bound(self.dim)
    }

    /// `L` padded to 3×3 with the identity in unused dimensions.
    pub fn linear(&self) -> Matrix3<f64> {
        let mut l = Matrix3::identity();
        if let Some(rows) = &self.linear_precompose {
            for (r, row) in rows.iter().enumerate().take(self.dim) {
                for (c, v) in row.iter().enumerate().take(self.dim) {
                    l[(r, c)] = *v;
                }
            }
        }
        l
    }

    pub fn linear_det(&self) -> f64 {
        self.linear().determinant()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidSpec(format!("dim must be 1, 2 or 3 (got {})", self.dim)));
        }
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return Err(Error::InvalidSpec(format!("margin must lie in (0,1) (got {})", self.margin)));
        }
        if !(self.eta_max >= 0.0 && self.eta_max.is_finite()) {
            return Err(Error::InvalidSpec(format!("eta_max must be finite and ≥ 0 (got {})", self.eta_max)));
        }
        let lip = self.eta_max * self.gradient_bound();
        if lip > 1.0 - self.margin {
            return Err(Error::InvalidSpec(format!(
                "eta_max·sup|∇B| = {lip:.6} exceeds 1 − margin = {:.6}; invertibility not guaranteed",
                1.0 - self.margin
            )));
        }
        if let Some(rows) = &self.linear_precompose {
            if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
                return Err(Error::InvalidSpec(format!(
                    "linear_precompose must be {0}×{0}",
                    self.dim
                )));
            }
            let det = self.linear_det();
            if !(det > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "linear_precompose must have positive determinant (got {det})"
                )));
            }
        }
        Ok(())
    }
}

/// One sample `Φ(·, ω)` on an `N^d` supercell torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealizationRecord", into = "RealizationRecord")]
pub struct DiffeomorphismRealization {
    pub spec: DiffeomorphismSpec,
    pub supercell_size: usize,
    /// `η_k` for cells in lexicographic order (axis 0 fastest), `d` per cell.
    pub amplitudes: Vec<f64>,
    pub seed: u64,
    linear: Matrix3<f64>,
    linear_inv: Matrix3<f64>,
}

#[derive(Serialize, Deserialize)]
struct RealizationRecord {
    spec: DiffeomorphismSpec,
    supercell_size: usize,
    amplitudes: Vec<f64>,
    seed: u64,
}

impl TryFrom<RealizationRecord> for DiffeomorphismRealization {
    type Error = Error;

    fn try_from(r: RealizationRecord) -> Result<Self> {
        Self::from_amplitudes(r.spec, r.supercell_size, r.amplitudes, r.seed)
    }
}

impl From<DiffeomorphismRealization> for RealizationRecord {
    fn from(r: DiffeomorphismRealization) -> Self {
        Self {
            spec: r.spec,
            supercell_size: r.supercell_size,
            amplitudes: r.amplitudes,
            seed: r.seed,
        }
    }
}

/// Draws a realization. Cell `k` uses its own ChaCha stream keyed by
/// `(seed, linear index of k)`, so the result does not depend on the order
/// in which cells are visited.
pub fn sample_diffeomorphism(
    spec: &DiffeomorphismSpec,
    supercell_size: usize,
    seed: u64,
) -> Result<DiffeomorphismRealization> {
    spec.validate()?;
    if supercell_size == 0 {
        return Err(Error::InvalidSpec("supercell size must be at least 1".into()));
    }
    let d = spec.dim;
    let cells = supercell_size.pow(d as u32);
    let mut amplitudes = Vec::with_capacity(cells * d);
    for cell in 0..cells {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(cell as u64);
        for _ in 0..d {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            amplitudes.push(spec.eta_max * (2.0 * u - 1.0));
        }
    }
    DiffeomorphismRealization::from_amplitudes(spec.clone(), supercell_size, amplitudes, seed)
}

impl DiffeomorphismRealization {
    pub fn from_amplitudes(
        spec: DiffeomorphismSpec,
        supercell_size: usize,
        amplitudes: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        let d = spec.dim;
        if amplitudes.len() != supercell_size.pow(d as u32) * d {
            return Err(Error::Dimension(format!(
                "expected {} amplitudes, got {}",
                supercell_size.pow(d as u32) * d,
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|a| a.abs() > spec.eta_max) {
            return Err(Error::InvalidSpec("amplitude exceeds eta_max".into()));
        }
        let linear = spec.linear();
        let linear_inv = linear
            .try_inverse()
            .ok_or_else(|| Error::InvalidSpec("linear_precompose is singular".into()))?;
        Ok(Self {
            spec,
            supercell_size,
            amplitudes,
            seed,
            linear,
            linear_inv,
        })
    }

    /// The identity map (zero amplitudes).
    pub fn identity(dim: usize, supercell_size: usize) -> Self {
        let spec = DiffeomorphismSpec::identity(dim);
        let n = supercell_size.pow(dim as u32) * dim;
        Self::from_amplitudes(spec, supercell_size, vec![0.0; n], 0).expect("identity is valid")
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    fn cell_of(&self, y: &[f64], local: &mut [f64; 3]) -> usize {
        let n = self.supercell_size as i64;
        let mut index = 0usize;
        let mut stride = 1usize;
        for i in 0..self.dim() {
            let f = y[i].floor();
            local[i] = y[i] - f;
            let k = (f as i64).rem_euclid(n) as usize;
            index += k * stride;
            stride *= self.supercell_size;
        }
        index
    }

    pub fn cell_amplitude(&self, cell: usize) -> &[f64] {
        let d = self.dim();
        &self.amplitudes[cell * d..(cell + 1) * d]
    }

    /// Displacement `D(y) = η_k b(y − k)` and the bump gradient.
    #[inline]
    fn displacement(&self, y: &[f64]) -> (Vector3<f64>, Vector3<f64>, [f64; 3]) {
        let mut local = [0.0; 3];
        let cell = self.cell_of(y, &mut local);
        let d = self.dim();
        let mut grad = [0.0; 3];
        let b = self.spec.bump.eval(&local[..d], &mut grad);
        let eta = self.cell_amplitude(cell);
        let mut e = Vector3::zeros();
        for i in 0..d {
            e[i] = eta[i];
        }
        (e * b, e, grad)
    }

    /// `Φ(y)`.
    pub fn map(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let (disp, _, _) = self.displacement(y);
        let mut v = Vector3::zeros();
        for i in 0..d {
            v[i] = y[i] + disp[i];
        }
        let x = self.linear * v;
        x.iter().take(d).copied().collect()
    }

    /// `η_k ⊗ ∇b(y − k)`, the gradient of the displacement before `L`.
    #[inline]
    pub fn displacement_gradient(&self, y: &[f64]) -> Matrix3<f64> {
        let d = self.dim();
        let (_, eta, grad) = self.displacement(y);
        let mut f = Matrix3::zeros();
        for r in 0..d {
            for s in 0..d {
                f[(r, s)] = eta[r] * grad[s];
            }
        }
        f
    }

    /// `∇Φ(y)` padded to 3×3 with the identity in unused dimensions.
    #[inline]
    pub fn gradient3(&self, y: &[f64]) -> Matrix3<f64> {
        let d = self.dim();
        let (_, eta, grad) = self.displacement(y);
        let mut f = Matrix3::identity();
        for r in 0..d {
            for s in 0..d {
                f[(r, s)] += eta[r] * grad[s];
            }
        }
        self.linear * f
    }

    /// `∇Φ(y)` as a `d×d` matrix, computed analytically.
    pub fn gradient(&self, y: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let f = self.gradient3(y);
        DMatrix::from_fn(d, d, |r, s| f[(r, s)])
    }

    /// `det ∇Φ(y)`.
    pub fn jacobian(&self, y: &[f64]) -> f64 {
        let (_, eta, grad) = self.displacement(y);
        let dot: f64 = (0..self.dim()).map(|i| eta[i] * grad[i]).sum();
        self.spec.linear_det() * (1.0 + dot)
    }

    /// Solves `Φ(y) = x` by damped Newton from `y₀ = L⁻¹x`.
    pub fn invert(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut xv = Vector3::zeros();
        for i in 0..d {
            xv[i] = x[i];
        }
        let target = self.linear_inv * xv;
        let mut y: Vec<f64> = (0..d).map(|i| target[i]).collect();
        // residual in the physical frame: L (y + D(y)) − x
        let residual = |y: &[f64]| -> (Vector3<f64>, f64) {
            let mapped = self.map(y);
            let mut r = Vector3::zeros();
            for i in 0..d {
                r[i] = mapped[i] - x[i];
            }
            let n = r.norm();
            (r, n)
        };
        let (mut r, mut rn) = residual(&y);
        for _ in 0..NEWTON_MAX_ITER {
            if rn <= tol {
                return Ok(y);
            }
            let jac = self.gradient3(&y);
            let step = jac
                .lu()
                .solve(&r)
                .ok_or(Error::IterationLimit {
                    iterations: 0,
                    residual: rn,
                })?;
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = (0..d).map(|i| y[i] - t * step[i]).collect();
                let (tr, tn) = residual(&trial);
                if tn < rn || t < 1e-10 {
                    y = trial;
                    r = tr;
                    rn = tn;
                    break;
                }
                t *= 0.5;
            }
        }
        if rn <= tol {
            Ok(y)
        } else {
            Err(Error::IterationLimit {
                iterations: NEWTON_MAX_ITER,
                residual: rn,
            })
        }
    }

    /// Realization `τ_k ω` with amplitudes relabelled so that
    /// `∇Φ_{τ_k ω}(y) = ∇Φ_ω(y + k)`.
    pub fn shifted(&self, shift: &[i64]) -> Self {
        let d = self.dim();
        let n = self.supercell_size;
        let cells = n.pow(d as u32);
        let mut amplitudes = vec![0.0; cells * d];
        for cell in 0..cells {
            // multi-index of `cell`, then of the source cell `cell + shift`
            let mut rem = cell;
            let mut src = 0usize;
            let mut stride = 1usize;
            for s in shift.iter().take(d) {
                let k = rem % n;
                rem /= n;
                let shifted = (k as i64 + s).rem_euclid(n as i64) as usize;
                src += shifted * stride;
                stride *= n;
            }
            amplitudes[cell * d..(cell + 1) * d].copy_from_slice(self.cell_amplitude(src));
        }
        let mut out = self.clone();
        out.amplitudes = amplitudes;
        out
    }
}
