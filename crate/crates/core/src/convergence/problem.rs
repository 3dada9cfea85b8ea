//! Dirichlet problems on the unit box: the oscillating problem at scale ε
//! and the constant-coefficient homogenized problem.

use serde::{Deserialize, Serialize};

use crate::corrector::HomogenizedTensor;
use crate::error::{Error, Result};
use crate::medium::{CoefficientField, DiffeomorphismRealization};
use crate::solver::{
    assemble_matrix, assemble_rhs, solve, Boundary, DiscreteField, DofMap, Mesh, SolveStats, SolverOptions,
};

/// Volume source `f` on the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Source {
    /// `f_β = value[β]`
    Constant { value: Vec<f64> },
    /// `f_β = amplitude[β] · Π_i sin(π x_i)`
    Sine { amplitude: Vec<f64> },
}

impl Source {
    pub fn components(&self) -> usize {
        match self {
            Source::Constant { value } => value.len(),
            Source::Sine { amplitude } => amplitude.len(),
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Source::Constant { value } => out.copy_from_slice(value),
            Source::Sine { amplitude } => {
                let s: f64 = x.iter().map(|v| (std::f64::consts::PI * v).sin()).product();
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o = a * s;
                }
            }
        }
    }

    /// `‖f‖_{L²((0,1)^d)}`.
    pub fn l2_norm(&self, dim: usize) -> f64 {
        match self {
            Source::Constant { value } => value.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Source::Sine { amplitude } => {
                amplitude.iter().map(|v| v * v).sum::<f64>().sqrt() * 0.5f64.powf(dim as f64 / 2.0)
            }
        }
    }
}

/// Discretization knobs for the Dirichlet solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletOptions {
    pub quadrature_order: usize,
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Tolerance of the map inversion `Φ⁻¹(x/ε)` (relative to `|x/ε|`).
    pub inversion_tol: f64,
}

impl Default for DirichletOptions {
    fn default() -> Self {
        Self {
            quadrature_order: 3,
            tol: 1e-10,
            max_iter: None,
            inversion_tol: 1e-13,
        }
    }
}

fn check_box(mesh: &Mesh, dim: usize, source: &Source, m: usize) -> Result<()> {
    if mesh.bc != Boundary::Dirichlet || mesh.extent != 1 {
        return Err(Error::InvalidSpec("expected a Dirichlet mesh of the unit box".into()));
    }
    if mesh.dim != dim {
        return Err(Error::Dimension(format!("mesh dimension {} but coefficient dimension {dim}", mesh.dim)));
    }
    if source.components() != m {
        return Err(Error::Dimension(format!(
            "source has {} components, coefficient has {m}",
            source.components()
        )));
    }
    Ok(())
}

/// Supercell size needed to hold `Φ⁻¹((0,1/ε)^d)` without wrapping:
/// the widest axis of `L⁻¹` applied to the window, rounded up.
pub fn required_supercell(real_linear_inv: &nalgebra::Matrix3<f64>, dim: usize, epsilon: f64) -> usize {
    let mut widest: f64 = 0.0;
    for r in 0..dim {
        let width: f64 = (0..dim).map(|c| real_linear_inv[(r, c)].abs()).sum::<f64>() / epsilon;
        widest = widest.max(width);
    }
    (widest - 1e-9).ceil().max(1.0) as usize
}

fn solve_dirichlet<C>(
    mesh: &Mesh,
    m: usize,
    source: &Source,
    opts: &DirichletOptions,
    coefficient: C,
) -> Result<(DiscreteField<f64>, SolveStats)>
where
    C: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    let dofs = DofMap::new(mesh, m);
    let matrix = assemble_matrix(mesh, &dofs, opts.quadrature_order, |x, out: &mut [f64]| {
        coefficient(x, out)?;
        Ok(0.0)
    })?;
    let mut rhs = assemble_rhs(mesh, &dofs, opts.quadrature_order, 1, |x, load: &mut [f64], _| {
        source.eval(x, load)
    })?;
    let rhs = rhs.pop().expect("one right-hand side");
    let solver = SolverOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        ..SolverOptions::default()
    };
    let (x, stats) = solve(&matrix, &rhs, &solver)?;
    Ok((DiscreteField::from_dofs(mesh, &dofs, &x), stats))
}

/// Resolution and window checks for the oscillating problem.
pub fn check_scale(mesh: &Mesh, real: &DiffeomorphismRealization, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidSpec(format!("epsilon must be positive (got {epsilon})")));
    }
    let limit = epsilon / 8.0;
    if mesh.h() > limit * (1.0 + 1e-12) {
        return Err(Error::UnresolvedScale { h: mesh.h(), limit });
    }
    let inv = real
        .spec
        .linear()
        .try_inverse()
        .ok_or_else(|| Error::InvalidSpec("linear_precompose is singular".into()))?;
    let required = required_supercell(&inv, mesh.dim, epsilon);
    if required > real.supercell_size {
        return Err(Error::SupercellTooSmall {
            required,
            available: real.supercell_size,
        });
    }
    Ok(())
}

/// `A(Φ⁻¹(x/ε))` at a physical point.
pub fn oscillating_coefficient<F>(
    field: &F,
    real: &DiffeomorphismRealization,
    epsilon: f64,
    inversion_tol: f64,
    x: &[f64],
    out: &mut [f64],
) -> Result<()>
where
    F: CoefficientField<f64> + ?Sized,
{
    let scaled: Vec<f64> = x.iter().map(|v| v / epsilon).collect();
    let size = scaled.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let z = real.invert(&scaled, inversion_tol * size)?;
    field.eval_into(&z, out);
    Ok(())
}

/// Galerkin solution of `−div(A(Φ⁻¹(x/ε))∇u) = f` in `(0,1)^d`, `u = 0` on
/// the boundary.
pub fn solve_heterogeneous<F>(
    field: &F,
    real: &DiffeomorphismRealization,
    epsilon: f64,
    source: &Source,
    mesh: &Mesh,
    opts: &DirichletOptions,
) -> Result<(DiscreteField<f64>, SolveStats)>
where
    F: CoefficientField<f64> + ?Sized,
{
    let d = field.dim();
    let m = field.components();
    check_box(mesh, d, source, m)?;
    if real.dim() != d {
        return Err(Error::Dimension("realization and coefficient dimensions differ".into()));
    }
    check_scale(mesh, real, epsilon)?;
    solve_dirichlet(mesh, m, source, opts, |x, out| {
        oscillating_coefficient(field, real, epsilon, opts.inversion_tol, x, out)
    })
}

/// Constant-coefficient Dirichlet solve with the real part of `A*`.
pub fn solve_homogenized(
    astar: &HomogenizedTensor,
    source: &Source,
    mesh: &Mesh,
    opts: &DirichletOptions,
) -> Result<(DiscreteField<f64>, SolveStats)> {
    check_box(mesh, astar.d, source, astar.m)?;
    let a = astar.real_matrix();
    let sym = (&a + a.transpose()) * 0.5;
    let eigenvalue = sym.symmetric_eigenvalues().min();
    if !(eigenvalue > 0.0) {
        return Err(Error::NonElliptic {
            point: Vec::new(),
            eigenvalue,
        });
    }
    let n = astar.size();
    let values: Vec<f64> = (0..n * n).map(|k| a[(k / n, k % n)]).collect();
    solve_dirichlet(mesh, astar.m, source, opts, |_, out| {
        out.copy_from_slice(&values);
        Ok(())
    })
}
