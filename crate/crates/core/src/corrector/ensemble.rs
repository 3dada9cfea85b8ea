//! Ensemble assembly of the effective tensor.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::{solve_directions, CorrectorOptions};
use super::frame::Frame;
use super::tensor::{HomogenizationMeta, HomogenizedTensor};
use crate::error::{Error, Result};
use crate::medium::{
    check_ellipticity, default_sampling, realization_mean_gradient, sample_diffeomorphism, CoefficientField,
    DiffeomorphismRealization, DiffeomorphismSpec,
};
use crate::quadrature::TensorRule;
use crate::scalar::Scalar;
use crate::solver::field::pairwise;
use crate::solver::{Mesh, SolveStats};
use crate::stats::{derive_seed, pairwise_sum, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogenizationConfig {
    pub realizations: usize,
    pub supercell_size: usize,
    /// Mesh resolution `1/h` on the reference torus.
    pub cells_per_unit: usize,
    pub theta: f64,
    pub seed: u64,
    pub tol: f64,
    pub quadrature_order: usize,
    pub max_iter: Option<usize>,
}

impl Default for HomogenizationConfig {
    fn default() -> Self {
        Self {
            realizations: 8,
            supercell_size: 4,
            cells_per_unit: 8,
            theta: 0.0,
            seed: 0,
            tol: 1e-10,
            quadrature_order: 3,
            max_iter: None,
        }
    }
}

impl HomogenizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::InvalidSpec("realizations must be at least 1".into()));
        }
        if self.supercell_size == 0 || self.cells_per_unit == 0 || self.quadrature_order == 0 {
            return Err(Error::InvalidSpec(
                "supercell_size, cells_per_unit and quadrature_order must be positive".into(),
            ));
        }
        if !(self.theta >= 0.0) || !self.theta.is_finite() {
            return Err(Error::InvalidSpec(format!("theta must be finite and ≥ 0 (got {})", self.theta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidSpec(format!("tol must be positive (got {})", self.tol)));
        }
        Ok(())
    }

    pub fn corrector_options(&self) -> CorrectorOptions {
        CorrectorOptions {
            quadrature_order: self.quadrature_order,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn realization_seed(&self, r: usize) -> u64 {
        derive_seed(self.seed, r as u64)
    }

    pub fn mesh(&self, dim: usize) -> Result<Mesh> {
        Mesh::torus(dim, self.supercell_size, self.cells_per_unit)
    }
}

/// Unit vectors `e_{iα}` of `R^{md}` in column order.
pub fn basis_directions<S: Scalar>(size: usize) -> Vec<Vec<S>> {
    (0..size)
        .map(|k| {
            let mut e = vec![S::zero(); size];
            e[k] = S::one();
            e
        })
        .collect()
}

struct RealizationSample<S> {
    /// Row-major `(md)×(md)` mean-flux matrix.
    flux: Vec<S>,
    mean_gradient: Vec<f64>,
    stats: Vec<SolveStats>,
}

fn check_inputs<S: Scalar, F: CoefficientField<S> + ?Sized>(
    field: &F,
    spec: &DiffeomorphismSpec,
    cfg: &HomogenizationConfig,
) -> Result<()> {
    cfg.validate()?;
    spec.validate()?;
    if spec.dim != field.dim() {
        return Err(Error::Dimension(format!(
            "diffeomorphism dimension {} differs from coefficient dimension {}",
            spec.dim,
            field.dim()
        )));
    }
    check_ellipticity(field, default_sampling(field.dim()))?;
    Ok(())
}

fn realization_sample<S, F>(
    field: &F,
    real: &DiffeomorphismRealization,
    cfg: &HomogenizationConfig,
    mesh: &Mesh,
) -> Result<RealizationSample<S>>
where
    S: Scalar,
    F: CoefficientField<S> + ?Sized,
{
    let md = field.dim() * field.components();
    let dirs = basis_directions::<S>(md);
    let sols = solve_directions(field, real, &dirs, cfg.theta, mesh, &cfg.corrector_options())?;
    let mut flux = vec![S::zero(); md * md];
    for (col, sol) in sols.iter().enumerate() {
        for row in 0..md {
            flux[row * md + col] = sol.mean_flux[row];
        }
    }
    let rule = TensorRule::new(field.dim(), cfg.quadrature_order);
    Ok(RealizationSample {
        flux,
        mean_gradient: realization_mean_gradient(real, &rule),
        stats: sols.into_iter().map(|s| s.stats).collect(),
    })
}

fn summarize<S: Scalar>(
    d: usize,
    m: usize,
    samples: Vec<RealizationSample<S>>,
    cfg: &HomogenizationConfig,
) -> Result<HomogenizedTensor> {
    let md = d * m;
    let r = samples.len();
    let mean_grad: Vec<f64> = (0..d * d)
        .map(|k| pairwise_sum(&samples.iter().map(|s| s.mean_gradient[k]).collect::<Vec<_>>()) / r as f64)
        .collect();
    let det = nalgebra::DMatrix::from_row_slice(d, d, &mean_grad).determinant();
    if !(det > 0.0) {
        return Err(Error::SingularMean { det });
    }
    let c_phi = 1.0 / det;
    let mut values = Vec::with_capacity(md * md);
    let mut stderr = Vec::with_capacity(md * md);
    for k in 0..md * md {
        let re: Vec<f64> = samples.iter().map(|s| s.flux[k].re()).collect();
        let im: Vec<f64> = samples.iter().map(|s| s.flux[k].im()).collect();
        let er = Estimate::from_samples(&re).scaled(c_phi);
        let ei = Estimate::from_samples(&im).scaled(c_phi);
        values.push(Complex64::new(er.value, ei.value));
        stderr.push(er.stderr.hypot(ei.stderr));
    }
    let mut meta = HomogenizationMeta {
        realizations: cfg.realizations,
        supercell_size: cfg.supercell_size,
        cells_per_unit: cfg.cells_per_unit,
        h: 1.0 / cfg.cells_per_unit as f64,
        theta: cfg.theta,
        seed: cfg.seed,
        realization_seeds: (0..cfg.realizations).map(|r| cfg.realization_seed(r)).collect(),
        tol: cfg.tol,
        quadrature_order: cfg.quadrature_order,
        c_phi,
        max_iterations: 0,
        max_residual: 0.0,
        fallbacks: Vec::new(),
    };
    for s in &samples {
        for st in &s.stats {
            meta.record(st);
        }
    }
    Ok(HomogenizedTensor {
        d,
        m,
        complex: S::IS_COMPLEX,
        values,
        stderr,
        meta,
    })
}

/// `A*` by ensemble averaging of supercell mean fluxes:
/// `a*[(jβ),(iα)] = c_Φ E[(1/N^d) ∫ det∇Φ (A(Ĵ∇w̃^{(iα)} + e_{iα}))_{jβ} dz]`.
///
/// Realization `r` uses seed `derive_seed(seed, r)`; results are reduced in
/// realization order, so the output does not depend on scheduling.
pub fn assemble_homogenized<S, F>(
    field: &F,
    spec: &DiffeomorphismSpec,
    cfg: &HomogenizationConfig,
) -> Result<HomogenizedTensor>
where
    S: Scalar,
    F: CoefficientField<S> + ?Sized,
{
    check_inputs(field, spec, cfg)?;
    let mesh = cfg.mesh(field.dim())?;
    let samples: Vec<RealizationSample<S>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let real = sample_diffeomorphism(spec, cfg.supercell_size, cfg.realization_seed(r))?;
            realization_sample(field, &real, cfg, &mesh)
        })
        .collect::<Result<_>>()?;
    summarize(field.dim(), field.components(), samples, cfg)
}

/// `A*(θ)` for each θ with fixed seeds. θ must decrease strictly and stay
/// positive, except for an optional final 0.
pub fn theta_sweep<S, F>(
    field: &F,
    spec: &DiffeomorphismSpec,
    cfg: &HomogenizationConfig,
    thetas: &[f64],
) -> Result<Vec<HomogenizedTensor>>
where
    S: Scalar,
    F: CoefficientField<S> + ?Sized,
{
    for (k, t) in thetas.iter().enumerate() {
        let last = k + 1 == thetas.len();
        if !t.is_finite() || *t < 0.0 || (*t == 0.0 && !last) {
            return Err(Error::InvalidSpec(format!(
                "theta sweep values must be positive (0 allowed last), got {t}"
            )));
        }
        if k > 0 && *t >= thetas[k - 1] {
            return Err(Error::InvalidSpec("theta sweep must be strictly decreasing".into()));
        }
    }
    thetas
        .iter()
        .map(|&theta| assemble_homogenized(field, spec, &HomogenizationConfig { theta, ..*cfg }))
        .collect()
}

/// `c_Φ E[(1/N^d) ∫ det∇Φ A dz]`, the effective tensor with the corrector
/// dropped (the limit of large θ).
pub fn uncorrected_average<S, F>(
    field: &F,
    spec: &DiffeomorphismSpec,
    cfg: &HomogenizationConfig,
) -> Result<HomogenizedTensor>
where
    S: Scalar,
    F: CoefficientField<S> + ?Sized,
{
    check_inputs(field, spec, cfg)?;
    let d = field.dim();
    let md = d * field.components();
    let mesh = cfg.mesh(d)?;
    let el = crate::solver::Q1Element::new(&mesh, cfg.quadrature_order);
    let samples: Vec<RealizationSample<S>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| -> Result<RealizationSample<S>> {
            let real = sample_diffeomorphism(spec, cfg.supercell_size, cfg.realization_seed(r))?;
            let mut per_element = Vec::with_capacity(mesh.element_count());
            let mut a = vec![S::zero(); md * md];
            let mut x = [0.0; 3];
            for e in 0..mesh.element_count() {
                let corner = mesh.element_multi(e);
                let mut acc = vec![S::zero(); md * md];
                for q in 0..el.points() {
                    el.point(&corner, q, &mut x);
                    field.eval_into(&x[..d], &mut a);
                    let w = el.weights[q] * Frame::at(&real, &x[..d]).det;
                    for (o, v) in acc.iter_mut().zip(&a) {
                        *o += v.scale(w);
                    }
                }
                per_element.push(acc);
            }
            let vol = mesh.volume();
            let flux = (0..md * md)
                .map(|k| pairwise(&per_element.iter().map(|v| v[k]).collect::<Vec<_>>()).scale(1.0 / vol))
                .collect();
            let rule = TensorRule::new(d, cfg.quadrature_order);
            Ok(RealizationSample {
                flux,
                mean_gradient: realization_mean_gradient(&real, &rule),
                stats: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;
    summarize(d, field.components(), samples, cfg)
}
