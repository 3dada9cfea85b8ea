//! ε → 0 sweeps comparing the oscillating and homogenized solutions.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{
    oscillating_coefficient, required_supercell, solve_heterogeneous, solve_homogenized, DirichletOptions, Source,
};
use crate::corrector::HomogenizedTensor;
use crate::error::{Error, Result};
use crate::medium::{sample_diffeomorphism, CoefficientField, DiffeomorphismSpec};
use crate::solver::field::pairwise;
use crate::solver::{DiscreteField, Mesh, Q1Element};
use crate::stats::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Strictly decreasing scales.
    pub epsilons: Vec<f64>,
    /// Mesh cells per period: `h = ε / cells_per_period` (at least 8).
    pub cells_per_period: usize,
    pub source: Source,
    pub seed: u64,
    pub dirichlet: DirichletOptions,
}

impl StudyConfig {
    pub fn new(epsilons: Vec<f64>, source: Source) -> Self {
        Self {
            epsilons,
            cells_per_period: 8,
            source,
            seed: 0,
            dirichlet: DirichletOptions::default(),
        }
    }

    /// Mesh resolution `1/h` for scale `ε`; `cells_per_period/ε` must be an
    /// integer.
    pub fn cells_per_unit(&self, epsilon: f64) -> Result<usize> {
        let v = self.cells_per_period as f64 / epsilon;
        let r = v.round();
        if (v - r).abs() > 1e-9 * v.max(1.0) || r < 1.0 {
            return Err(Error::InvalidSpec(format!(
                "cells_per_period/epsilon = {v} is not a positive integer"
            )));
        }
        Ok(r as usize)
    }

    /// Seed of the realization used at scale `ε`: keyed by the value of
    /// `ε`, so a point of the sweep reproduces on its own.
    pub fn realization_seed(&self, epsilon: f64) -> u64 {
        derive_seed(self.seed, epsilon.to_bits())
    }

    fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::InvalidSpec("epsilons must not be empty".into()));
        }
        for w in self.epsilons.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidSpec("epsilons must be strictly decreasing".into()));
            }
        }
        if self.cells_per_period < 8 {
            return Err(Error::InvalidSpec(format!(
                "cells_per_period must be at least 8 (got {})",
                self.cells_per_period
            )));
        }
        for &e in &self.epsilons {
            self.cells_per_unit(e)?;
        }
        Ok(())
    }
}

/// Test functions `φ_q(x) = Π sin(π q_i x_i)` for `q ∈ {1,2}^d`.
pub fn test_battery(dim: usize) -> Vec<Vec<usize>> {
    (0..1usize << dim)
        .map(|code| (0..dim).map(|i| 1 + ((code >> i) & 1)).collect())
        .collect()
}

fn phi(q: &[usize], x: &[f64]) -> f64 {
    q.iter().zip(x).map(|(&k, &v)| (PI * k as f64 * v).sin()).product()
}

fn grad_phi(q: &[usize], x: &[f64], out: &mut [f64]) {
    for s in 0..q.len() {
        out[s] = (0..q.len())
            .map(|i| {
                let k = PI * q[i] as f64;
                if i == s {
                    k * (k * x[i]).cos()
                } else {
                    (k * x[i]).sin()
                }
            })
            .product();
    }
}

/// Diagnostics of one sweep, aligned by index with `epsilons`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dim: usize,
    pub components: usize,
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub supercell_sizes: Vec<usize>,
    pub cells_per_unit: Vec<usize>,
    /// Wave numbers `q` of the test functions.
    pub test_functions: Vec<Vec<usize>>,
    /// `‖u^ε − u*‖_{L²}`.
    pub l2_errors: Vec<f64>,
    /// `‖u*‖_{L²}` on the same mesh.
    pub l2_norms: Vec<f64>,
    /// `⟨u^ε − u*, φ_q⟩`, entries ordered `(q, β)`.
    pub weak_pairings: Vec<Vec<f64>>,
    /// `∫ (A^ε∇u^ε − A*∇u*)_{βj} φ_q`, entries ordered `(q, β, j)`.
    pub flux_pairings: Vec<Vec<f64>>,
    /// `∫ (A^ε∇u^ε − A*∇u*)·∇φ_q`, entries ordered `(q, β)`.
    pub flux_gradient_pairings: Vec<Vec<f64>>,
    /// `c‖∇u^ε‖ / (C_P‖f‖)` with `c` the ellipticity constant and
    /// `C_P = 1/(π√d)`; at most 1.
    pub energy_ratios: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl ConvergenceReport {
    pub fn weak_max(&self, k: usize) -> f64 {
        self.weak_pairings[k].iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn flux_max(&self, k: usize) -> f64 {
        self.flux_pairings[k].iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Test-function norms `‖φ_q‖_{L²} = 2^{-d/2}`.
    pub fn test_norm(&self) -> f64 {
        0.5f64.powf(self.dim as f64 / 2.0)
    }

    pub fn all_finite(&self) -> bool {
        let lists = [&self.l2_errors, &self.l2_norms, &self.energy_ratios, &self.residuals];
        lists.iter().all(|l| l.iter().all(|v| v.is_finite()))
            && [&self.weak_pairings, &self.flux_pairings, &self.flux_gradient_pairings]
                .iter()
                .all(|t| t.iter().flatten().all(|v| v.is_finite()))
    }

    pub fn to_csv(&self) -> String {
        let mut cols = vec![
            "epsilon".to_string(),
            "seed".into(),
            "supercell_size".into(),
            "cells_per_unit".into(),
            "l2_error".into(),
            "l2_norm".into(),
            "energy_ratio".into(),
            "residual".into(),
        ];
        let m = self.components;
        let d = self.dim;
        for q in &self.test_functions {
            let tag: String = q.iter().map(|k| k.to_string()).collect();
            for b in 0..m {
                cols.push(format!("weak_q{tag}_c{b}"));
            }
        }
        for q in &self.test_functions {
            let tag: String = q.iter().map(|k| k.to_string()).collect();
            for b in 0..m {
                for j in 0..d {
                    cols.push(format!("flux_q{tag}_c{b}_x{j}"));
                }
            }
        }
        for q in &self.test_functions {
            let tag: String = q.iter().map(|k| k.to_string()).collect();
            for b in 0..m {
                cols.push(format!("fluxgrad_q{tag}_c{b}"));
            }
        }
        let mut out = cols.join(",");
        out.push('\n');
        for k in 0..self.epsilons.len() {
            let mut row = vec![
                format!("{:.17e}", self.epsilons[k]),
                self.seeds[k].to_string(),
                self.supercell_sizes[k].to_string(),
                self.cells_per_unit[k].to_string(),
            ];
            for v in [self.l2_errors[k], self.l2_norms[k], self.energy_ratios[k], self.residuals[k]] {
                row.push(format!("{v:.17e}"));
            }
            for list in [&self.weak_pairings[k], &self.flux_pairings[k], &self.flux_gradient_pairings[k]] {
                row.extend(list.iter().map(|v| format!("{v:.17e}")));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

struct Point {
    seed: u64,
    supercell: usize,
    cells: usize,
    l2_error: f64,
    l2_norm: f64,
    weak: Vec<f64>,
    flux: Vec<f64>,
    flux_grad: Vec<f64>,
    energy_ratio: f64,
    residual: f64,
}

/// Runs the sweep: for each ε a fresh realization on a supercell just
/// large enough for the window, `u^ε` and `u*` on the same mesh, and the
/// diagnostics of [`ConvergenceReport`]. Scales run as independent tasks.
pub fn run_convergence_study<F>(
    field: &F,
    spec: &DiffeomorphismSpec,
    astar: &HomogenizedTensor,
    cfg: &StudyConfig,
) -> Result<ConvergenceReport>
where
    F: CoefficientField<f64> + ?Sized,
{
    cfg.validate()?;
    spec.validate()?;
    let d = field.dim();
    let m = field.components();
    if spec.dim != d || astar.d != d || astar.m != m {
        return Err(Error::Dimension("coefficient, diffeomorphism and A* dimensions differ".into()));
    }
    let ellipticity = field.ellipticity_constant();
    let battery = test_battery(d);
    let a_star = astar.real_matrix();
    let md = d * m;
    let inv = spec
        .linear()
        .try_inverse()
        .ok_or_else(|| Error::InvalidSpec("linear_precompose is singular".into()))?;
    let f_norm = cfg.source.l2_norm(d);
    let poincare = 1.0 / (PI * (d as f64).sqrt());

    let points: Vec<Point> = cfg
        .epsilons
        .par_iter()
        .map(|&eps| -> Result<Point> {
            let cells = cfg.cells_per_unit(eps)?;
            let seed = cfg.realization_seed(eps);
            let supercell = required_supercell(&inv, d, eps);
            let real = sample_diffeomorphism(spec, supercell, seed)?;
            let mesh = Mesh::unit_box(d, cells)?;
            let (u_eps, stats) = solve_heterogeneous(field, &real, eps, &cfg.source, &mesh, &cfg.dirichlet)?;
            let (u_star, _) = solve_homogenized(astar, &cfg.source, &mesh, &cfg.dirichlet)?;
            // per quadrature node: |diff|², |u*|², |∇u^ε|², pairings
            let nq = battery.len();
            let outputs = 3 + nq * m + nq * md + nq * m;
            let el = Q1Element::new(&mesh, cfg.dirichlet.quadrature_order);
            let totals = integrate_pair(&u_eps, &u_star, &el, outputs, |x, ue, ge, us, gs, out| {
                let mut a = vec![0.0; md * md];
                oscillating_coefficient(field, &real, eps, cfg.dirichlet.inversion_tol, x, &mut a)?;
                let mut flux = vec![0.0; md];
                for r in 0..md {
                    let he: f64 = (0..md).map(|c| a[r * md + c] * ge[c]).sum();
                    let hs: f64 = (0..md).map(|c| a_star[(r, c)] * gs[c]).sum();
                    flux[r] = he - hs;
                }
                out[0] = (0..m).map(|b| (ue[b] - us[b]).powi(2)).sum();
                out[1] = us.iter().map(|v| v * v).sum();
                out[2] = ge.iter().map(|v| v * v).sum();
                let mut g = [0.0; 3];
                for (qi, q) in battery.iter().enumerate() {
                    let p = phi(q, x);
                    grad_phi(q, x, &mut g);
                    for b in 0..m {
                        out[3 + qi * m + b] = (ue[b] - us[b]) * p;
                        let base = 3 + nq * m + (qi * m + b) * d;
                        for j in 0..d {
                            out[base + j] = flux[b * d + j] * p;
                        }
                        let gbase = 3 + nq * m + nq * md + qi * m + b;
                        out[gbase] = (0..d).map(|j| flux[b * d + j] * g[j]).sum();
                    }
                }
                Ok(())
            })?;
            Ok(Point {
                seed,
                supercell,
                cells,
                l2_error: totals[0].sqrt(),
                l2_norm: totals[1].sqrt(),
                energy_ratio: if f_norm > 0.0 {
                    ellipticity * totals[2].sqrt() / (poincare * f_norm)
                } else {
                    0.0
                },
                weak: totals[3..3 + nq * m].to_vec(),
                flux: totals[3 + nq * m..3 + nq * m + nq * md].to_vec(),
                flux_grad: totals[3 + nq * m + nq * md..].to_vec(),
                residual: stats.residual,
            })
        })
        .collect::<Result<_>>()?;

    Ok(ConvergenceReport {
        dim: d,
        components: m,
        epsilons: cfg.epsilons.clone(),
        seeds: points.iter().map(|p| p.seed).collect(),
        supercell_sizes: points.iter().map(|p| p.supercell).collect(),
        cells_per_unit: points.iter().map(|p| p.cells).collect(),
        test_functions: battery,
        l2_errors: points.iter().map(|p| p.l2_error).collect(),
        l2_norms: points.iter().map(|p| p.l2_norm).collect(),
        weak_pairings: points.iter().map(|p| p.weak.clone()).collect(),
        flux_pairings: points.iter().map(|p| p.flux.clone()).collect(),
        flux_gradient_pairings: points.iter().map(|p| p.flux_grad.clone()).collect(),
        energy_ratios: points.iter().map(|p| p.energy_ratio).collect(),
        residuals: points.iter().map(|p| p.residual).collect(),
    })
}

type PairIntegrand<'a> = dyn Fn(&[f64], &[f64], &[f64], &[f64], &[f64], &mut [f64]) -> Result<()> + Sync + 'a;

/// Integrates a functional of two fields on the same mesh; the closure sees
/// `(x, u, ∇u, v, ∇v, out)`.
fn integrate_pair(
    u: &DiscreteField<f64>,
    v: &DiscreteField<f64>,
    el: &Q1Element,
    outputs: usize,
    f: impl Fn(&[f64], &[f64], &[f64], &[f64], &[f64], &mut [f64]) -> Result<()> + Sync,
) -> Result<Vec<f64>> {
    let f: &PairIntegrand<'_> = &f;
    let mesh = &u.mesh;
    let d = mesh.dim;
    let m = u.components;
    let per_element: Vec<Result<Vec<f64>>> = (0..mesh.element_count())
        .into_par_iter()
        .map(|e| {
            let corner = mesh.element_multi(e);
            let mut nodes = [0usize; 8];
            mesh.element_nodes(e, &mut nodes);
            let mut acc = vec![0.0; outputs];
            let mut out = vec![0.0; outputs];
            let mut vals = [vec![0.0; m], vec![0.0; m]];
            let mut grads = [vec![0.0; m * d], vec![0.0; m * d]];
            let mut x = [0.0; 3];
            for q in 0..el.points() {
                el.point(&corner, q, &mut x);
                for (k, field) in [u, v].iter().enumerate() {
                    vals[k].iter_mut().for_each(|t| *t = 0.0);
                    grads[k].iter_mut().for_each(|t| *t = 0.0);
                    for a in 0..el.nodes {
                        for c in 0..m {
                            let val = field.values[nodes[a] * m + c];
                            vals[k][c] += val * el.value(q, a);
                            for s in 0..d {
                                grads[k][c * d + s] += val * el.grad(q, a, s);
                            }
                        }
                    }
                }
                out.iter_mut().for_each(|t| *t = 0.0);
                f(&x[..d], &vals[0], &grads[0], &vals[1], &grads[1], &mut out)?;
                for (a, o) in acc.iter_mut().zip(&out) {
                    *a += o * el.weights[q];
                }
            }
            Ok(acc)
        })
        .collect();
    let per_element = per_element.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..outputs)
        .map(|k| pairwise(&per_element.iter().map(|v| v[k]).collect::<Vec<_>>()))
        .collect())
}
