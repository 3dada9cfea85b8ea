//! Jacobi-preconditioned Krylov solvers: CG for Hermitian positive
//! definite systems, COCG for complex-symmetric ones and restarted GMRES
//! for everything else. Each solve runs on one thread; independent systems
//! are meant to be solved concurrently by the caller.

use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::{dot_h, dot_u, norm2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Chosen from the symmetry of the matrix.
    Auto,
    Cg,
    Cocg,
    Gmres { restart: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    /// Iteration cap; `None` scales with the system size.
    pub max_iter: Option<usize>,
    pub method: Method,
    /// Restrict iterates to zero mean per component (`m` components,
    /// unknown `dof = node * m + component`). Used for pure-periodic
    /// problems without a zeroth-order term.
    pub zero_mean: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            method: Method::Auto,
            zero_mean: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
    pub method: Method,
    /// Set when the first method broke down and GMRES took over.
    pub fallback: Option<String>,
}

const GMRES_RESTART: usize = 60;
const SYMMETRY_TOL: f64 = 1e-12;

fn project<S: Scalar>(x: &mut [S], components: Option<usize>) {
    let Some(m) = components else { return };
    let nodes = x.len() / m;
    if nodes == 0 {
        return;
    }
    for c in 0..m {
        let mean: S = x.iter().skip(c).step_by(m).copied().sum::<S>().scale(1.0 / nodes as f64);
        for v in x.iter_mut().skip(c).step_by(m) {
            *v -= mean;
        }
    }
}

struct Context<'a, S> {
    a: &'a CsrMatrix<S>,
    inv_diag: Vec<S>,
    opts: SolverOptions,
    max_iter: usize,
}

impl<S: Scalar> Context<'_, S> {
    fn precondition(&self, r: &[S], z: &mut [S]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = *r * *d;
        }
        project(z, self.opts.zero_mean);
    }

    fn apply(&self, x: &[S], y: &mut [S]) {
        self.a.matvec(x, y);
        project(y, self.opts.zero_mean);
    }

    fn residual(&self, b: &[S], x: &[S], r: &mut [S]) {
        self.apply(x, r);
        for (r, b) in r.iter_mut().zip(b) {
            *r = *b - *r;
        }
    }
}

enum Outcome {
    Converged(usize),
    Breakdown(usize, &'static str),
    Exhausted(usize),
}

/// Solves `A x = b`. A zero right-hand side returns zero without iterating.
pub fn solve<S: Scalar>(a: &CsrMatrix<S>, b: &[S], opts: &SolverOptions) -> Result<(Vec<S>, SolveStats)> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::Dimension(format!("rhs has {} entries for a {n}×{n} matrix", b.len())));
    }
    if let Some(m) = opts.zero_mean {
        if m == 0 || n % m != 0 {
            return Err(Error::Dimension(format!("{n} unknowns do not split into {m} components")));
        }
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidSpec(format!("solver tolerance must be positive (got {})", opts.tol)));
    }
    let mut rhs = b.to_vec();
    project(&mut rhs, opts.zero_mean);
    let method = match opts.method {
        Method::Auto => {
            let scale = a.max_abs().max(f64::MIN_POSITIVE);
            if a.hermitian_defect() <= SYMMETRY_TOL * scale {
                Method::Cg
            } else if a.symmetric_defect() <= SYMMETRY_TOL * scale {
                Method::Cocg
            } else {
                Method::Gmres { restart: GMRES_RESTART }
            }
        }
        m => m,
    };
    let bnorm = norm2(&rhs);
    if bnorm == 0.0 {
        return Ok((
            vec![S::zero(); n],
            SolveStats {
                iterations: 0,
                residual: 0.0,
                method,
                fallback: None,
            },
        ));
    }
    let inv_diag = a
        .diagonal()
        .into_iter()
        .map(|d| if d.abs() > 0.0 { S::one() / d } else { S::one() })
        .collect();
    let ctx = Context {
        a,
        inv_diag,
        opts: *opts,
        max_iter: opts.max_iter.unwrap_or_else(|| (10 * n).max(1000)),
    };
    let mut x = vec![S::zero(); n];
    let first = match method {
        Method::Cg => krylov_cg(&ctx, &rhs, bnorm, &mut x, true),
        Method::Cocg => krylov_cg(&ctx, &rhs, bnorm, &mut x, false),
        Method::Gmres { restart } => gmres(&ctx, &rhs, bnorm, &mut x, restart.max(1)),
        Method::Auto => unreachable!(),
    };
    let (iterations, used, fallback) = match first {
        Outcome::Converged(it) => (it, method, None),
        Outcome::Breakdown(it, _) | Outcome::Exhausted(it) if matches!(method, Method::Gmres { .. }) => {
            return Err(no_convergence(&ctx, &rhs, &x, bnorm, it));
        }
        Outcome::Breakdown(it, why) => fall_back(&ctx, &rhs, bnorm, &mut x, method, it, why)?,
        Outcome::Exhausted(it) => fall_back(&ctx, &rhs, bnorm, &mut x, method, it, "iteration limit")?,
    };
    let mut r = vec![S::zero(); n];
    ctx.residual(&rhs, &x, &mut r);
    let residual = norm2(&r) / bnorm;
    Ok((
        x,
        SolveStats {
            iterations,
            residual,
            method: used,
            fallback,
        },
    ))
}

fn fall_back<S: Scalar>(
    ctx: &Context<'_, S>,
    b: &[S],
    bnorm: f64,
    x: &mut [S],
    method: Method,
    spent: usize,
    why: &str,
) -> Result<(usize, Method, Option<String>)> {
    let note = format!("{method:?} stopped after {spent} iterations ({why}); switched to GMRES");
    x.iter_mut().for_each(|v| *v = S::zero());
    match gmres(ctx, b, bnorm, x, GMRES_RESTART) {
        Outcome::Converged(more) => Ok((spent + more, Method::Gmres { restart: GMRES_RESTART }, Some(note))),
        Outcome::Breakdown(more, _) | Outcome::Exhausted(more) => Err(no_convergence(ctx, b, x, bnorm, spent + more)),
    }
}

fn no_convergence<S: Scalar>(ctx: &Context<'_, S>, b: &[S], x: &[S], bnorm: f64, iterations: usize) -> Error {
    let mut r = vec![S::zero(); b.len()];
    ctx.residual(b, x, &mut r);
    Error::NoConvergence {
        iterations,
        residual: norm2(&r) / bnorm,
    }
}

/// Convenience wrapper for real symmetric positive definite systems.
pub fn solve_spd(a: &CsrMatrix<f64>, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let opts = SolverOptions {
        tol,
        method: Method::Cg,
        ..SolverOptions::default()
    };
    solve(a, b, &opts).map(|(x, _)| x)
}

/// Preconditioned CG (`hermitian`) or COCG (unconjugated bilinear form).
fn krylov_cg<S: Scalar>(ctx: &Context<'_, S>, b: &[S], bnorm: f64, x: &mut [S], hermitian: bool) -> Outcome {
    let n = b.len();
    let dot = |u: &[S], v: &[S]| if hermitian { dot_h(u, v) } else { dot_u(u, v) };
    let mut r = vec![S::zero(); n];
    ctx.residual(b, x, &mut r);
    let mut z = vec![S::zero(); n];
    ctx.precondition(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![S::zero(); n];
    let mut rz = dot(&r, &z);
    let target = ctx.opts.tol * bnorm;
    for it in 0..ctx.max_iter {
        if norm2(&r) <= target {
            return Outcome::Converged(it);
        }
        ctx.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if hermitian && !(pap.re() > 0.0) {
            return Outcome::Breakdown(it, "non-positive curvature");
        }
        if pap.abs() <= f64::EPSILON * norm2(&p) * norm2(&ap) {
            return Outcome::Breakdown(it, "vanishing bilinear form");
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        ctx.precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        if rz.abs() == 0.0 {
            return Outcome::Breakdown(it, "vanishing residual product");
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let mut r = vec![S::zero(); n];
    ctx.residual(b, x, &mut r);
    if norm2(&r) <= target {
        Outcome::Converged(ctx.max_iter)
    } else {
        Outcome::Exhausted(ctx.max_iter)
    }
}

/// Complex Givens rotation zeroing `b` against `a`: returns `(c, s)` with
/// `[c, s; −conj(s), c]·[a; b] = [ρ; 0]`.
fn givens<S: Scalar>(a: S, b: S) -> (f64, S) {
    let na = a.abs();
    let nb = b.abs();
    if nb == 0.0 {
        return (1.0, S::zero());
    }
    if na == 0.0 {
        return (0.0, b.conj().scale(1.0 / nb));
    }
    let r = na.hypot(nb);
    (na / r, a.scale(1.0 / na) * b.conj().scale(1.0 / r))
}

/// Right-preconditioned restarted GMRES with modified Gram–Schmidt.
fn gmres<S: Scalar>(ctx: &Context<'_, S>, b: &[S], bnorm: f64, x: &mut [S], restart: usize) -> Outcome {
    let n = b.len();
    let target = ctx.opts.tol * bnorm;
    let mut total = 0;
    let mut r = vec![S::zero(); n];
    let mut w = vec![S::zero(); n];
    loop {
        ctx.residual(b, x, &mut r);
        let beta = norm2(&r);
        if beta <= target {
            return Outcome::Converged(total);
        }
        if total >= ctx.max_iter {
            return Outcome::Exhausted(total);
        }
        let mut basis: Vec<Vec<S>> = vec![r.iter().map(|v| v.scale(1.0 / beta)).collect()];
        let mut precond: Vec<Vec<S>> = Vec::with_capacity(restart);
        let mut hess: Vec<Vec<S>> = Vec::with_capacity(restart);
        let mut rot: Vec<(f64, S)> = Vec::with_capacity(restart);
        let mut g = vec![S::from_real(beta)];
        let mut breakdown = false;
        for j in 0..restart {
            if total >= ctx.max_iter {
                break;
            }
            total += 1;
            let mut z = vec![S::zero(); n];
            ctx.precondition(&basis[j], &mut z);
            ctx.apply(&z, &mut w);
            precond.push(z);
            let mut col = vec![S::zero(); j + 2];
            for (i, v) in basis.iter().enumerate() {
                let h = dot_h(v, &w);
                col[i] = h;
                for k in 0..n {
                    w[k] -= h * v[k];
                }
            }
            let wn = norm2(&w);
            col[j + 1] = S::from_real(wn);
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (u, v) = (col[i], col[i + 1]);
                col[i] = u.scale(c) + s * v;
                col[i + 1] = v.scale(c) - s.conj() * u;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = col[j].scale(c) + s * col[j + 1];
            col[j + 1] = S::zero();
            rot.push((c, s));
            let gj = g[j];
            g[j] = gj.scale(c);
            g.push(-(s.conj() * gj));
            hess.push(col);
            if wn <= f64::EPSILON * beta {
                breakdown = true;
            } else {
                basis.push(w.iter().map(|v| v.scale(1.0 / wn)).collect());
            }
            if g[j + 1].abs() <= target || breakdown {
                break;
            }
        }
        let k = hess.len();
        if k == 0 {
            return Outcome::Exhausted(total);
        }
        let mut y = vec![S::zero(); k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for l in i + 1..k {
                acc -= hess[l][i] * y[l];
            }
            if hess[i][i].abs() == 0.0 {
                return Outcome::Breakdown(total, "singular Hessenberg matrix");
            }
            y[i] = acc / hess[i][i];
        }
        for (yi, z) in y.iter().zip(&precond) {
            for q in 0..n {
                x[q] += *yi * z[q];
            }
        }
        project(x, ctx.opts.zero_mean);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix<f64> {
        let rows = (0..n)
            .map(|r| {
                let mut v = vec![r];
                if r > 0 {
                    v.push(r - 1);
                }
                if r + 1 < n {
                    v.push(r + 1);
                }
                v.sort_unstable();
                v
            })
            .collect();
        let mut a = CsrMatrix::from_pattern(rows);
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                a.vals[k] = if a.cols[k] == r { 2.0 + shift } else { -1.0 };
            }
        }
        a
    }

    fn check(a: &CsrMatrix<f64>, method: Method) -> SolveStats {
        let n = a.n;
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&exact, &mut b);
        let opts = SolverOptions {
            tol: 1e-12,
            method,
            ..Default::default()
        };
        let (x, stats) = solve(a, &b, &opts).unwrap();
        let err = x.iter().zip(&exact).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{method:?} error {err}");
        stats
    }

    #[test]
    fn all_methods_solve_spd_system() {
        let a = laplacian_1d(50, 0.1);
        assert_eq!(check(&a, Method::Auto).method, Method::Cg);
        check(&a, Method::Cocg);
        check(&a, Method::Gmres { restart: 10 });
    }

    #[test]
    fn nonsymmetric_system_uses_gmres() {
        let mut a = laplacian_1d(40, 0.5);
        for r in 0..a.n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                if a.cols[k] == r + 1 {
                    a.vals[k] = -0.4;
                }
            }
        }
        assert!(matches!(check(&a, Method::Auto).method, Method::Gmres { .. }));
    }

    #[test]
    fn indefinite_cg_falls_back() {
        let mut a = laplacian_1d(30, 0.0);
        for r in 0..a.n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                if a.cols[k] == r && r % 2 == 0 {
                    a.vals[k] = -3.0;
                }
            }
        }
        let stats = check(&a, Method::Cg);
        assert!(stats.fallback.is_some());
    }

    #[test]
    fn complex_symmetric_uses_cocg() {
        let n = 40;
        let base = laplacian_1d(n, 0.0);
        let a = CsrMatrix {
            n,
            row_ptr: base.row_ptr.clone(),
            cols: base.cols.clone(),
            vals: base
                .vals
                .iter()
                .zip(&base.cols)
                .map(|(&v, _)| if v > 0.0 { Complex64::new(2.2, 0.7) } else { Complex64::new(v, 0.0) })
                .collect(),
        };
        let exact: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut b = vec![Complex64::default(); n];
        a.matvec(&exact, &mut b);
        let (x, stats) = solve(&a, &b, &SolverOptions::default()).unwrap();
        assert_eq!(stats.method, Method::Cocg);
        let err: f64 = x.iter().zip(&exact).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-6);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let a = laplacian_1d(5, 1.0);
        let (x, stats) = solve(&a, &[0.0; 5], &SolverOptions::default()).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn singular_periodic_system_with_zero_mean() {
        let n = 16;
        let rows = (0..n)
            .map(|r| {
                let mut v = vec![(r + n - 1) % n, r, (r + 1) % n];
                v.sort_unstable();
                v
            })
            .collect();
        let mut a = CsrMatrix::<f64>::from_pattern(rows);
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                a.vals[k] = if a.cols[k] == r { 2.0 } else { -1.0 };
            }
        }
        let exact: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&exact, &mut b);
        let opts = SolverOptions {
            zero_mean: Some(1),
            ..Default::default()
        };
        let (x, _) = solve(&a, &b, &opts).unwrap();
        for (u, v) in x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let a = laplacian_1d(200, 0.0);
        let b = vec![1.0; 200];
        let opts = SolverOptions {
            max_iter: Some(3),
            method: Method::Gmres { restart: 2 },
            ..Default::default()
        };
        assert!(matches!(solve(&a, &b, &opts), Err(Error::NoConvergence { .. })));
    }
}
