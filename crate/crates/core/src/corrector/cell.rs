//! Corrector problems on one realization's supercell torus, solved in
//! reference coordinates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frame::Frame;
use crate::error::{Error, Result};
use crate::medium::{check_ellipticity, default_sampling, CoefficientField, DiffeomorphismRealization, Transposed};
use crate::scalar::Scalar;
use crate::solver::field::pairwise;
use crate::solver::{
    assemble_matrix, assemble_rhs, solve, Boundary, DiscreteField, DofMap, Mesh, Q1Element, SolveStats,
    SolverOptions,
};

/// Discretization knobs shared by all corrector solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorOptions {
    /// Gauss points per axis and element.
    pub quadrature_order: usize,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        Self {
            quadrature_order: 3,
            tol: 1e-10,
            max_iter: None,
        }
    }
}

/// Corrector `w̃` for one direction `p` on one realization.
#[derive(Debug, Clone)]
pub struct CorrectorSolution<S> {
    pub realization: DiffeomorphismRealization,
    pub direction: Vec<S>,
    pub theta: f64,
    /// Periodic representative on the reference torus `[0,N)^d`.
    pub w_tilde: DiscreteField<S>,
    /// Cell-centred `∇_z w̃`, `m·d` entries per cell.
    pub reference_gradient: Vec<S>,
    /// Cell-centred `(∇Φ)⁻ᵀ ∇_z w̃`.
    pub physical_gradient: Vec<S>,
    /// Relative residual of the linear solve.
    pub residual: f64,
    pub stats: SolveStats,
    /// `(1/N^d) ∫ det∇Φ (∇Φ)⁻ᵀ∇w̃ dz`.
    pub mean_physical_gradient: Vec<S>,
    /// `(1/N^d) ∫ |(∇Φ)⁻ᵀ∇w̃|² det∇Φ dz`.
    pub physical_gradient_energy: f64,
    /// `(1/N^d) ∫ |∇_z w̃|² dz`.
    pub gradient_energy: f64,
    /// `(1/N^d) ∫ |w̃|² dz`.
    pub value_energy: f64,
    /// `(1/N^d) ∫ det∇Φ · A(z)((∇Φ)⁻ᵀ∇w̃ + p) dz`, the realization's mean flux.
    pub mean_flux: Vec<S>,
}

impl<S: Scalar> CorrectorSolution<S> {
    /// `|mean physical gradient|` relative to the RMS physical gradient.
    pub fn zero_mean_defect(&self) -> f64 {
        let mean: f64 = self.mean_physical_gradient.iter().map(|v| v.abs_sq()).sum::<f64>().sqrt();
        let rms = self.physical_gradient_energy.sqrt();
        if rms == 0.0 {
            mean
        } else {
            mean / rms
        }
    }
}

fn check_mesh(mesh: &Mesh, real: &DiffeomorphismRealization, d: usize) -> Result<()> {
    if mesh.bc != Boundary::Periodic {
        return Err(Error::InvalidSpec("corrector mesh must be periodic".into()));
    }
    if mesh.dim != d || real.dim() != d {
        return Err(Error::Dimension(format!(
            "mesh dimension {}, realization dimension {}, coefficient dimension {d}",
            mesh.dim,
            real.dim()
        )));
    }
    if mesh.extent != real.supercell_size {
        return Err(Error::InvalidSpec(format!(
            "mesh extent {} differs from supercell size {}",
            mesh.extent, real.supercell_size
        )));
    }
    Ok(())
}

/// Solves the corrector problems for several directions on one
/// realization, assembling the matrix once.
pub fn solve_directions<S, F>(
    field: &F,
    real: &DiffeomorphismRealization,
    directions: &[Vec<S>],
    theta: f64,
    mesh: &Mesh,
    opts: &CorrectorOptions,
) -> Result<Vec<CorrectorSolution<S>>>
where
    S: Scalar,
    F: CoefficientField<S> + ?Sized,
{
    let d = field.dim();
    let m = field.components();
    let md = d * m;
    check_mesh(mesh, real, d)?;
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::InvalidSpec(format!("theta must be finite and ≥ 0 (got {theta})")));
    }
    if let Some(p) = directions.iter().find(|p| p.len() != md) {
        return Err(Error::Dimension(format!("direction has {} entries, expected {md}", p.len())));
    }
    let dofs = DofMap::new(mesh, m);
    let matrix = assemble_matrix(mesh, &dofs, opts.quadrature_order, |z, out: &mut [S]| {
        let mut a = vec![S::zero(); md * md];
        field.eval_into(z, &mut a);
        let frame = Frame::at(real, z);
        frame.pull_back(d, m, &a, out);
        Ok(S::from_real(theta * frame.det))
    })?;
    let nrhs = directions.len();
    let rhs = assemble_rhs(mesh, &dofs, opts.quadrature_order, nrhs, |z, _load: &mut [S], flux: &mut [S]| {
        let mut a = vec![S::zero(); md * md];
        field.eval_into(z, &mut a);
        let frame = Frame::at(real, z);
        let mut ap = vec![S::zero(); md];
        for (k, p) in directions.iter().enumerate() {
            for r in 0..md {
                ap[r] = (0..md).map(|c| a[r * md + c] * p[c]).sum();
            }
            frame.pull_back_flux(d, m, &ap, &mut flux[k * md..(k + 1) * md]);
        }
    })?;
    let solver = SolverOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        zero_mean: (theta == 0.0).then_some(m),
        ..SolverOptions::default()
    };
    let solved: Vec<(Vec<S>, SolveStats)> = rhs
        .par_iter()
        .map(|b| solve(&matrix, b, &solver))
        .collect::<Result<_>>()?;
    let fields: Vec<DiscreteField<S>> = solved
        .iter()
        .map(|(x, _)| DiscreteField::from_dofs(mesh, &dofs, x))
        .collect();
    let summaries = integrate_fluxes(field, real, mesh, &fields, directions, opts.quadrature_order)?;

    let centres: Vec<Frame> = (0..mesh.element_count())
        .map(|e| {
            let corner = mesh.element_multi(e);
            let z: Vec<f64> = (0..d).map(|i| (corner[i] as f64 + 0.5) * mesh.h()).collect();
            Frame::at(real, &z)
        })
        .collect();
    Ok(fields
        .into_iter()
        .zip(solved)
        .zip(summaries)
        .zip(directions)
        .map(|(((w, (_, stats)), summary), p)| {
            let reference_gradient = w.gradient_field();
            let mut physical_gradient = vec![S::zero(); reference_gradient.len()];
            for (e, frame) in centres.iter().enumerate() {
                frame.push_gradient(
                    d,
                    m,
                    &reference_gradient[e * md..(e + 1) * md],
                    &mut physical_gradient[e * md..(e + 1) * md],
                );
            }
            CorrectorSolution {
                realization: real.clone(),
                direction: p.clone(),
                theta,
                w_tilde: w,
                reference_gradient,
                physical_gradient,
                residual: stats.residual,
                stats,
                mean_physical_gradient: summary.mean_physical_gradient,
                physical_gradient_energy: summary.physical_gradient_energy,
                gradient_energy: summary.gradient_energy,
                value_energy: summary.value_energy,
                mean_flux: summary.mean_flux,
            }
        })
        .collect())
}

struct Summary<S> {
    mean_physical_gradient: Vec<S>,
    physical_gradient_energy: f64,
    gradient_energy: f64,
    value_energy: f64,
    mean_flux: Vec<S>,
}

/// Supercell averages of every corrector in one pass over the quadrature
/// nodes. Per-element partial sums are reduced pairwise in element order.
fn integrate_fluxes<S, F>(
    field: &F,
    real: &DiffeomorphismRealization,
    mesh: &Mesh,
    fields: &[DiscreteField<S>],
    directions: &[Vec<S>],
    order: usize,
) -> Result<Vec<Summary<S>>>
where
    S: Scalar,
    F: CoefficientField<S> + ?Sized,
{
    let d = mesh.dim;
    let m = field.components();
    let md = d * m;
    let el = Q1Element::new(mesh, order);
    let nk = fields.len();
    // per direction: flux (md), physical gradient (md), 3 energies
    let stride = 2 * md + 3;
    let per_element: Vec<Result<Vec<S>>> = (0..mesh.element_count())
        .into_par_iter()
        .map(|e| {
            let corner = mesh.element_multi(e);
            let mut nodes = [0usize; 8];
            mesh.element_nodes(e, &mut nodes);
            let mut acc = vec![S::zero(); nk * stride];
            let mut a = vec![S::zero(); md * md];
            let mut u = vec![S::zero(); m];
            let mut g = vec![S::zero(); md];
            let mut phys = vec![S::zero(); md];
            let mut x = [0.0; 3];
            for q in 0..el.points() {
                el.point(&corner, q, &mut x);
                let z = &x[..d];
                field.eval_into(z, &mut a);
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteCoefficient { point: z.to_vec() });
                }
                let frame = Frame::at(real, z);
                let w = el.weights[q];
                for (k, wf) in fields.iter().enumerate() {
                    u.iter_mut().for_each(|v| *v = S::zero());
                    g.iter_mut().for_each(|v| *v = S::zero());
                    for a_node in 0..el.nodes {
                        let base = nodes[a_node] * m;
                        for c in 0..m {
                            let val = wf.values[base + c];
                            u[c] += val.scale(el.value(q, a_node));
                            for s in 0..d {
                                g[c * d + s] += val.scale(el.grad(q, a_node, s));
                            }
                        }
                    }
                    frame.push_gradient(d, m, &g, &mut phys);
                    let slot = &mut acc[k * stride..(k + 1) * stride];
                    let p = &directions[k];
                    let wd = w * frame.det;
                    for r in 0..md {
                        let mut flux = S::zero();
                        for c in 0..md {
                            flux += a[r * md + c] * (phys[c] + p[c]);
                        }
                        slot[r] += flux.scale(wd);
                        slot[md + r] += phys[r].scale(wd);
                    }
                    let phys_sq: f64 = phys.iter().map(|v| v.abs_sq()).sum();
                    let grad_sq: f64 = g.iter().map(|v| v.abs_sq()).sum();
                    let val_sq: f64 = u.iter().map(|v| v.abs_sq()).sum();
                    slot[2 * md] += S::from_real(phys_sq * wd);
                    slot[2 * md + 1] += S::from_real(grad_sq * w);
                    slot[2 * md + 2] += S::from_real(val_sq * w);
                }
            }
            Ok(acc)
        })
        .collect();
    let per_element = per_element.into_iter().collect::<Result<Vec<_>>>()?;
    let vol = mesh.volume();
    let total: Vec<S> = (0..nk * stride)
        .map(|k| {
            let column: Vec<S> = per_element.iter().map(|v| v[k]).collect();
            pairwise(&column).scale(1.0 / vol)
        })
        .collect();
    Ok((0..nk)
        .map(|k| {
            let slot = &total[k * stride..(k + 1) * stride];
            Summary {
                mean_flux: slot[..md].to_vec(),
                mean_physical_gradient: slot[md..2 * md].to_vec(),
                physical_gradient_energy: slot[2 * md].re(),
                gradient_energy: slot[2 * md + 1].re(),
                value_energy: slot[2 * md + 2].re(),
            }
        })
        .collect())
}

/// Corrector for direction `p`: find periodic `w̃` with
/// `∫ det∇Φ A(Ĵ∇w̃ + p)·Ĵ∇w̃′ + θ ∫ det∇Φ w̃·w̃′ = 0` for all `w̃′`.
pub fn solve_corrector<S, F>(
    field: &F,
    real: &DiffeomorphismRealization,
    p: &[S],
    theta: f64,
    mesh: &Mesh,
    opts: &CorrectorOptions,
) -> Result<CorrectorSolution<S>>
where
    S: Scalar,
    F: CoefficientField<S> + ?Sized,
{
    check_ellipticity(field, default_sampling(field.dim()))?;
    let mut out = solve_directions(field, real, &[p.to_vec()], theta, mesh, opts)?;
    Ok(out.pop().expect("one direction"))
}

/// Corrector of the transposed coefficient `a_{jiβα}`.
pub fn solve_transpose_corrector<S, F>(
    field: &F,
    real: &DiffeomorphismRealization,
    p: &[S],
    theta: f64,
    mesh: &Mesh,
    opts: &CorrectorOptions,
) -> Result<CorrectorSolution<S>>
where
    S: Scalar,
    F: CoefficientField<S>,
{
    solve_corrector(&Transposed(field), real, p, theta, mesh, opts)
}
