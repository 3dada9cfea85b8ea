//! Ensemble estimators: mean gradient, `c_Φ`, ergodic averages and the
//! determinant (null-Lagrangian) consistency check.
//!
//! Every estimator draws realization `r` with seed `derive_seed(seed, r)`,
//! integrates over the whole `N^d` supercell with tensor Gauss–Legendre
//! rules per unit cell, divides by `N^d`, and reduces over realizations in
//! index order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diffeo::{sample_diffeomorphism, DiffeomorphismRealization, DiffeomorphismSpec};
use crate::error::{Error, Result};
use crate::quadrature::TensorRule;
use crate::stats::{derive_seed, entrywise, pairwise_sum, Estimate};

/// Ensemble sizes for the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub realizations: usize,
    pub supercell_size: usize,
    pub quadrature_order: usize,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            realizations: 64,
            supercell_size: 4,
            quadrature_order: 4,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    fn check(&self) -> Result<()> {
        if self.realizations == 0 || self.supercell_size == 0 || self.quadrature_order == 0 {
            return Err(Error::InvalidSpec(
                "realizations, supercell_size and quadrature_order must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Estimate of `M = E[∫_Q ∇Φ]` and `c_Φ = 1/det M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanGradientEstimate {
    /// `d×d`, row-major rows.
    pub mean: Vec<Vec<f64>>,
    pub c_phi: f64,
    pub stderr: Vec<Vec<f64>>,
    pub n_realizations: usize,
    pub n_quadrature: usize,
}

impl MeanGradientEstimate {
    pub fn determinant(&self) -> f64 {
        det_rows(&self.mean)
    }
}

pub(crate) fn det_rows(rows: &[Vec<f64>]) -> f64 {
    let d = rows.len();
    nalgebra::DMatrix::from_fn(d, d, |r, c| rows[r][c]).determinant()
}

/// Visits every quadrature node of the supercell `[0,N)^d`; `f` receives
/// the node and its weight (weights sum to `N^d`).
pub(crate) fn for_each_node(dim: usize, n: usize, rule: &TensorRule, mut f: impl FnMut(&[f64], f64)) {
    let cells = n.pow(dim as u32);
    let mut y = [0.0; 3];
    for cell in 0..cells {
        let mut rem = cell;
        let mut corner = [0.0; 3];
        for c in corner.iter_mut().take(dim) {
            *c = (rem % n) as f64;
            rem /= n;
        }
        for q in 0..rule.len() {
            let p = rule.point(q);
            for i in 0..dim {
                y[i] = corner[i] + p[i];
            }
            f(&y[..dim], rule.weights[q]);
        }
    }
}

fn realizations(spec: &DiffeomorphismSpec, cfg: &EnsembleConfig) -> Result<Vec<DiffeomorphismRealization>> {
    (0..cfg.realizations)
        .into_par_iter()
        .map(|r| sample_diffeomorphism(spec, cfg.supercell_size, derive_seed(cfg.seed, r as u64)))
        .collect()
}

/// Supercell average of `∇Φ` for one realization (row-major `d×d`).
///
/// Integrates only the displacement part `η ⊗ ∇b` and adds the identity
/// afterwards, so a zero displacement returns `L` exactly.
pub fn realization_mean_gradient(real: &DiffeomorphismRealization, rule: &TensorRule) -> Vec<f64> {
    let d = real.dim();
    let n = real.supercell_size;
    let lin = real.spec.linear();
    let mut acc = vec![0.0; d * d];
    for_each_node(d, n, rule, |y, w| {
        let g = real.displacement_gradient(y);
        for r in 0..d {
            for s in 0..d {
                acc[r * d + s] += w * g[(r, s)];
            }
        }
    });
    let vol = n.pow(d as u32) as f64;
    let mut f = nalgebra::Matrix3::identity();
    for r in 0..d {
        for s in 0..d {
            f[(r, s)] += acc[r * d + s] / vol;
        }
    }
    let m = lin * f;
    (0..d * d).map(|k| m[(k / d, k % d)]).collect()
}

fn summarize_gradient(d: usize, samples: &[Vec<f64>], order: usize) -> Result<MeanGradientEstimate> {
    let est = entrywise(samples);
    let rows = |f: &dyn Fn(&Estimate) -> f64| -> Vec<Vec<f64>> {
        (0..d).map(|r| (0..d).map(|s| f(&est[r * d + s])).collect()).collect()
    };
    let mean = rows(&|e| e.value);
    let stderr = rows(&|e| e.stderr);
    let det = det_rows(&mean);
    if !(det > 0.0) {
        return Err(Error::SingularMean { det });
    }
    Ok(MeanGradientEstimate {
        mean,
        c_phi: 1.0 / det,
        stderr,
        n_realizations: samples.len(),
        n_quadrature: order.pow(d as u32),
    })
}

/// Monte-Carlo plus quadrature estimate of `E[∫_Q ∇Φ]`.
pub fn estimate_mean_gradient(spec: &DiffeomorphismSpec, cfg: &EnsembleConfig) -> Result<MeanGradientEstimate> {
    cfg.check()?;
    let rule = TensorRule::new(spec.dim, cfg.quadrature_order);
    let reals = realizations(spec, cfg)?;
    let samples: Vec<Vec<f64>> = reals
        .par_iter()
        .map(|r| realization_mean_gradient(r, &rule))
        .collect();
    summarize_gradient(spec.dim, &samples, cfg.quadrature_order)
}

/// `c_Φ · E[(1/N^d) ∫_{[0,N)^d} g(z, ω) det∇Φ(z, ω) dz]`, the reference-frame
/// form of `c_Φ E[∫_{Φ(Q)} g(Φ⁻¹(x), ·) dx]`. `c_Φ` is estimated from the
/// same realizations.
pub fn ergodic_average<G>(g: G, spec: &DiffeomorphismSpec, cfg: &EnsembleConfig) -> Result<Estimate>
where
    G: Fn(&[f64], &DiffeomorphismRealization) -> Result<f64> + Sync,
{
    cfg.check()?;
    let rule = TensorRule::new(spec.dim, cfg.quadrature_order);
    let reals = realizations(spec, cfg)?;
    let per_real: Vec<(f64, Vec<f64>)> = reals
        .par_iter()
        .map(|real| -> Result<(f64, Vec<f64>)> {
            let d = real.dim();
            let n = real.supercell_size;
            let mut terms = Vec::with_capacity(n.pow(d as u32) * rule.len());
            let mut err = None;
            for_each_node(d, n, &rule, |y, w| {
                if err.is_some() {
                    return;
                }
                match g(y, real) {
                    Ok(v) => terms.push(w * v * real.jacobian(y)),
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            let vol = n.pow(d as u32) as f64;
            Ok((pairwise_sum(&terms) / vol, realization_mean_gradient(real, &rule)))
        })
        .collect::<Result<_>>()?;
    let grads: Vec<Vec<f64>> = per_real.iter().map(|(_, g)| g.clone()).collect();
    let mean_grad = summarize_gradient(spec.dim, &grads, cfg.quadrature_order)?;
    let values: Vec<f64> = per_real.iter().map(|(v, _)| *v).collect();
    Ok(Estimate::from_samples(&values).scaled(mean_grad.c_phi))
}

/// Determinant consistency: `E[∫_Q det∇Φ]` against `det E[∫_Q ∇Φ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullLagrangianReport {
    pub mean_jacobian: Estimate,
    pub det_of_mean_gradient: f64,
    /// Linearized standard error of `det M`.
    pub det_stderr: f64,
    pub combined_stderr: f64,
    pub residual: f64,
}

impl NullLagrangianReport {
    /// `|residual| ≤ k · combined_stderr`, with a floor at rounding level.
    pub fn within(&self, k: f64) -> bool {
        let floor = 64.0 * f64::EPSILON * self.det_of_mean_gradient.abs().max(1.0);
        self.residual.abs() <= k * self.combined_stderr + floor
    }
}

pub fn null_lagrangian_check(spec: &DiffeomorphismSpec, cfg: &EnsembleConfig) -> Result<NullLagrangianReport> {
    cfg.check()?;
    let rule = TensorRule::new(spec.dim, cfg.quadrature_order);
    let reals = realizations(spec, cfg)?;
    let d = spec.dim;
    let per_real: Vec<(f64, Vec<f64>)> = reals
        .par_iter()
        .map(|real| {
            let n = real.supercell_size;
            // det∇Φ = det L (1 + η·∇b): integrate the displacement part only
            let mut terms = Vec::new();
            for_each_node(d, n, &rule, |y, w| terms.push(w * real.displacement_gradient(y).trace()));
            let vol = n.pow(d as u32) as f64;
            let jac = real.spec.linear_det() * (1.0 + pairwise_sum(&terms) / vol);
            (jac, realization_mean_gradient(real, &rule))
        })
        .collect();
    let jac: Vec<f64> = per_real.iter().map(|(v, _)| *v).collect();
    let grads: Vec<Vec<f64>> = per_real.iter().map(|(_, g)| g.clone()).collect();
    let mg = summarize_gradient(d, &grads, cfg.quadrature_order)?;
    let mean_jacobian = Estimate::from_samples(&jac);
    let m = nalgebra::DMatrix::from_fn(d, d, |r, c| mg.mean[r][c]);
    let det = m.determinant();
    // ∂det/∂M_rc = cof_rc = det · (M⁻¹)_cr
    let inv = m.clone().try_inverse().ok_or(Error::SingularMean { det })?;
    let mut var = 0.0;
    for r in 0..d {
        for c in 0..d {
            let cof = det * inv[(c, r)];
            var += (cof * mg.stderr[r][c]).powi(2);
        }
    }
    let det_stderr = var.sqrt();
    Ok(NullLagrangianReport {
        residual: mean_jacobian.value - det,
        combined_stderr: (mean_jacobian.stderr.powi(2) + var).sqrt(),
        mean_jacobian,
        det_of_mean_gradient: det,
        det_stderr,
    })
}
