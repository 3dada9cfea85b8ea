//! Q1 Galerkin assembly for `m`-component systems
//!
//! ```text
//! Σ ∫ a_{ijαβ} ∂_i w_α ∂_j w'_β + ∫ θ·ρ w_α w'_α = ∫ f_β w'_β − ∫ q_{jβ} ∂_j w'_β
//! ```
//!
//! Coefficients are sampled at Gauss points. Element matrices are computed
//! in parallel in fixed chunks and scattered sequentially in element order,
//! so the assembled values do not depend on the thread count.

use rayon::prelude::*;

use super::element::Q1Element;
use super::mesh::{DofMap, Mesh};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const CHUNK: usize = 2048;

/// Sparsity pattern of the Q1 stencil for the given numbering.
pub fn pattern<S: Scalar>(mesh: &Mesh, dofs: &DofMap) -> CsrMatrix<S> {
    let m = dofs.components;
    let mut rows = Vec::with_capacity(dofs.len());
    for free in 0..dofs.free_nodes() {
        let node = dofs.node(free);
        let nbrs: Vec<usize> = mesh
            .node_neighbors(node)
            .into_iter()
            .filter_map(|n| dofs.free(n))
            .collect();
        let row: Vec<usize> = nbrs
            .iter()
            .flat_map(|&f| (0..m).map(move |a| f * m + a))
            .collect();
        for _ in 0..m {
            rows.push(row.clone());
        }
    }
    CsrMatrix::from_pattern(rows)
}

fn check_finite<S: Scalar>(values: &[S], x: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteCoefficient { point: x.to_vec() })
    }
}

/// Assembles the stiffness-plus-mass matrix. `sampler(x, coef)` writes the
/// `(md)×(md)` flux matrix at `x` and returns the zeroth-order weight
/// (`θ` times any density) at `x`. Sampling errors abort the assembly.
pub fn assemble_matrix<S, C>(
    mesh: &Mesh,
    dofs: &DofMap,
    order: usize,
    sampler: C,
) -> Result<CsrMatrix<S>>
where
    S: Scalar,
    C: Fn(&[f64], &mut [S]) -> Result<S> + Sync,
{
    let el = Q1Element::new(mesh, order);
    let d = mesh.dim;
    let m = dofs.components;
    let md = d * m;
    let nodes = el.nodes;
    let local = nodes * m;
    let mut matrix = pattern::<S>(mesh, dofs);

    let element_matrix = |e: usize| -> Result<Vec<S>> {
        let corner = mesh.element_multi(e);
        let mut ke = vec![S::zero(); local * local];
        let mut coef = vec![S::zero(); md * md];
        // g[(a*m + α) * md + row] = Σ_s B[row, α d + s] ∂_s N_a
        let mut g = vec![S::zero(); local * md];
        let mut x = [0.0; 3];
        for q in 0..el.points() {
            el.point(&corner, q, &mut x);
            let mass = sampler(&x[..d], &mut coef)?;
            check_finite(&coef, &x[..d])?;
            check_finite(&[mass], &x[..d])?;
            let w = el.weights[q];
            for a in 0..nodes {
                for alpha in 0..m {
                    let slot = &mut g[(a * m + alpha) * md..(a * m + alpha + 1) * md];
                    for (row, out) in slot.iter_mut().enumerate() {
                        let mut acc = S::zero();
                        for s in 0..d {
                            acc += coef[row * md + alpha * d + s].scale(el.grad(q, a, s));
                        }
                        *out = acc;
                    }
                }
            }
            for b in 0..nodes {
                for beta in 0..m {
                    let r = b * m + beta;
                    for a in 0..nodes {
                        for alpha in 0..m {
                            let c = a * m + alpha;
                            let gv = &g[c * md + beta * d..c * md + beta * d + d];
                            let mut acc = S::zero();
                            for t in 0..d {
                                acc += gv[t].scale(el.grad(q, b, t));
                            }
                            if alpha == beta {
                                acc += mass.scale(el.value(q, a) * el.value(q, b));
                            }
                            ke[r * local + c] += acc.scale(w);
                        }
                    }
                }
            }
        }
        Ok(ke)
    };

    let mut element_nodes = [0usize; 8];
    let count = mesh.element_count();
    let mut start = 0;
    while start < count {
        let end = (start + CHUNK).min(count);
        let blocks: Vec<Result<Vec<S>>> = (start..end).into_par_iter().map(element_matrix).collect();
        for (offset, block) in blocks.into_iter().enumerate() {
            let ke = block?;
            mesh.element_nodes(start + offset, &mut element_nodes);
            for b in 0..nodes {
                let Some(fb) = dofs.free(element_nodes[b]) else { continue };
                for beta in 0..m {
                    let row = fb * m + beta;
                    for a in 0..nodes {
                        let Some(fa) = dofs.free(element_nodes[a]) else { continue };
                        for alpha in 0..m {
                            let col = fa * m + alpha;
                            let pos = matrix.position(row, col).expect("stencil covers element couplings");
                            matrix.vals[pos] += ke[(b * m + beta) * local + a * m + alpha];
                        }
                    }
                }
            }
        }
        start = end;
    }
    Ok(matrix)
}

/// Assembles `nrhs` right-hand sides at once. `source(x, load, flux)`
/// writes the volume loads (`nrhs × m`) and the flux sources (`nrhs × md`,
/// laid out like a gradient) at `x`.
pub fn assemble_rhs<S, F>(
    mesh: &Mesh,
    dofs: &DofMap,
    order: usize,
    nrhs: usize,
    source: F,
) -> Result<Vec<Vec<S>>>
where
    S: Scalar,
    F: Fn(&[f64], &mut [S], &mut [S]) + Sync,
{
    let el = Q1Element::new(mesh, order);
    let d = mesh.dim;
    let m = dofs.components;
    let md = d * m;
    let nodes = el.nodes;
    let local = nodes * m;

    let element_vectors = |e: usize| -> Result<Vec<S>> {
        let corner = mesh.element_multi(e);
        let mut fe = vec![S::zero(); nrhs * local];
        let mut load = vec![S::zero(); nrhs * m];
        let mut flux = vec![S::zero(); nrhs * md];
        let mut x = [0.0; 3];
        for q in 0..el.points() {
            el.point(&corner, q, &mut x);
            load.iter_mut().for_each(|v| *v = S::zero());
            flux.iter_mut().for_each(|v| *v = S::zero());
            source(&x[..d], &mut load, &mut flux);
            check_finite(&load, &x[..d])?;
            check_finite(&flux, &x[..d])?;
            let w = el.weights[q];
            for k in 0..nrhs {
                for b in 0..nodes {
                    for beta in 0..m {
                        let mut acc = load[k * m + beta].scale(el.value(q, b));
                        for t in 0..d {
                            acc -= flux[k * md + beta * d + t].scale(el.grad(q, b, t));
                        }
                        fe[k * local + b * m + beta] += acc.scale(w);
                    }
                }
            }
        }
        Ok(fe)
    };

    let mut rhs = vec![vec![S::zero(); dofs.len()]; nrhs];
    let mut element_nodes = [0usize; 8];
    let count = mesh.element_count();
    let mut start = 0;
    while start < count {
        let end = (start + CHUNK).min(count);
        let blocks: Vec<Result<Vec<S>>> = (start..end).into_par_iter().map(element_vectors).collect();
        for (offset, block) in blocks.into_iter().enumerate() {
            let fe = block?;
            mesh.element_nodes(start + offset, &mut element_nodes);
            for b in 0..nodes {
                let Some(fb) = dofs.free(element_nodes[b]) else { continue };
                for k in 0..nrhs {
                    for beta in 0..m {
                        rhs[k][fb * m + beta] += fe[k * local + b * m + beta];
                    }
                }
            }
        }
        start = end;
    }
    Ok(rhs)
}

/// Discrete problem: matrix, right-hand side and numbering.
#[derive(Debug, Clone)]
pub struct LinearSystem<S> {
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub matrix: CsrMatrix<S>,
    pub rhs: Vec<S>,
}

type PointFn<'a, S> = &'a (dyn Fn(&[f64], &mut [S]) + Sync);

/// Pointwise description of a coercive variational problem on a mesh.
pub struct BilinearProblem<'a, S> {
    pub mesh: Mesh,
    pub components: usize,
    pub quadrature_order: usize,
    /// Flux matrix `A(x)`.
    pub coefficient: PointFn<'a, S>,
    /// Zeroth-order coefficient θ ≥ 0.
    pub theta: f64,
    /// Volume source `f(x)` (`m` entries).
    pub load: Option<PointFn<'a, S>>,
    /// Constant macroscopic gradient `p`: adds `−∫ A p · ∇w'`.
    pub gradient_source: Option<Vec<S>>,
}

impl<'a, S: Scalar> BilinearProblem<'a, S> {
    pub fn new(mesh: Mesh, components: usize, coefficient: PointFn<'a, S>) -> Self {
        Self {
            mesh,
            components,
            quadrature_order: 2,
            coefficient,
            theta: 0.0,
            load: None,
            gradient_source: None,
        }
    }
}

pub fn assemble<S: Scalar>(problem: &BilinearProblem<'_, S>) -> Result<LinearSystem<S>> {
    if !(problem.theta >= 0.0) {
        return Err(Error::InvalidSpec(format!("theta must be ≥ 0 (got {})", problem.theta)));
    }
    let mesh = &problem.mesh;
    let m = problem.components;
    let md = mesh.dim * m;
    if let Some(p) = &problem.gradient_source {
        if p.len() != md {
            return Err(Error::Dimension(format!("gradient source has {} entries, expected {md}", p.len())));
        }
    }
    let dofs = DofMap::new(mesh, m);
    let theta = S::from_real(problem.theta);
    let matrix = assemble_matrix(mesh, &dofs, problem.quadrature_order, |x, coef: &mut [S]| {
        (problem.coefficient)(x, coef);
        Ok(theta)
    })?;
    let mut rhs = assemble_rhs(mesh, &dofs, problem.quadrature_order, 1, |x, load: &mut [S], flux: &mut [S]| {
        if let Some(f) = problem.load {
            f(x, load);
        }
        if let Some(p) = &problem.gradient_source {
            let mut coef = vec![S::zero(); md * md];
            (problem.coefficient)(x, &mut coef);
            for r in 0..md {
                flux[r] = (0..md).map(|c| coef[r * md + c] * p[c]).sum();
            }
        }
    })?;
    Ok(LinearSystem {
        mesh: mesh.clone(),
        dofs,
        matrix,
        rhs: rhs.pop().expect("one right-hand side"),
    })
}
