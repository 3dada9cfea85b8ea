//! Nodal fields on a mesh: interpolation, integration, cell gradients and
//! file export.

use std::io::{Read, Write};

use rayon::prelude::*;

use super::element::Q1Element;
use super::mesh::{Boundary, DofMap, Mesh};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"SHGF";
const VERSION: u32 = 1;

/// Q1 field with `components` values per node, stored node-major
/// (`values[node * m + component]`). Constrained boundary nodes hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField<S> {
    pub mesh: Mesh,
    pub components: usize,
    pub values: Vec<S>,
}

/// Order-fixed pairwise sum of a slice.
pub fn pairwise<S: Scalar>(values: &[S]) -> S {
    match values.len() {
        0 => S::zero(),
        n if n <= 8 => values.iter().fold(S::zero(), |acc, &v| acc + v),
        n => pairwise(&values[..n / 2]) + pairwise(&values[n / 2..]),
    }
}

impl<S: Scalar> DiscreteField<S> {
    pub fn zeros(mesh: &Mesh, components: usize) -> Self {
        Self {
            mesh: mesh.clone(),
            components,
            values: vec![S::zero(); mesh.node_count() * components],
        }
    }

    /// Expands a solution vector over free unknowns to all nodes.
    pub fn from_dofs(mesh: &Mesh, dofs: &DofMap, x: &[S]) -> Self {
        let m = dofs.components;
        let mut field = Self::zeros(mesh, m);
        for free in 0..dofs.free_nodes() {
            let node = dofs.node(free);
            field.values[node * m..(node + 1) * m].copy_from_slice(&x[free * m..(free + 1) * m]);
        }
        field
    }

    /// Nodal interpolant of `f(x, out)`.
    pub fn interpolate<F: Fn(&[f64], &mut [S])>(mesh: &Mesh, components: usize, f: F) -> Self {
        let mut field = Self::zeros(mesh, components);
        let d = mesh.dim;
        for node in 0..mesh.node_count() {
            let x = mesh.node_coords(node);
            f(&x[..d], &mut field.values[node * components..(node + 1) * components]);
        }
        field
    }

    pub fn node_value(&self, node: usize, component: usize) -> S {
        self.values[node * self.components + component]
    }

    /// Nodal mean of each component. On a torus this equals the integral
    /// mean of the Q1 interpolant.
    pub fn component_means(&self) -> Vec<S> {
        let m = self.components;
        let nodes = self.mesh.node_count();
        (0..m)
            .map(|c| {
                let column: Vec<S> = self.values.iter().skip(c).step_by(m).copied().collect();
                pairwise(&column).scale(1.0 / nodes as f64)
            })
            .collect()
    }

    /// Integrates `f(x, u, ∇u, out)` over the mesh with a Gauss rule of the
    /// given order; `∇u` is laid out as `grad[c * d + s] = ∂_s u_c`.
    pub fn integrate<F>(&self, order: usize, outputs: usize, f: F) -> Result<Vec<S>>
    where
        F: Fn(&[f64], &[S], &[S], &mut [S]) -> Result<()> + Sync,
    {
        let el = Q1Element::new(&self.mesh, order);
        self.integrate_with(&el, outputs, f)
    }

    pub fn integrate_with<F>(&self, el: &Q1Element, outputs: usize, f: F) -> Result<Vec<S>>
    where
        F: Fn(&[f64], &[S], &[S], &mut [S]) -> Result<()> + Sync,
    {
        let mesh = &self.mesh;
        let d = mesh.dim;
        let m = self.components;
        let per_element: Vec<Result<Vec<S>>> = (0..mesh.element_count())
            .into_par_iter()
            .map(|e| {
                let corner = mesh.element_multi(e);
                let mut nodes = [0usize; 8];
                mesh.element_nodes(e, &mut nodes);
                let mut acc = vec![S::zero(); outputs];
                let mut out = vec![S::zero(); outputs];
                let mut u = vec![S::zero(); m];
                let mut grad = vec![S::zero(); m * d];
                let mut x = [0.0; 3];
                for q in 0..el.points() {
                    el.point(&corner, q, &mut x);
                    u.iter_mut().for_each(|v| *v = S::zero());
                    grad.iter_mut().for_each(|v| *v = S::zero());
                    for a in 0..el.nodes {
                        let base = nodes[a] * m;
                        for c in 0..m {
                            let val = self.values[base + c];
                            u[c] += val.scale(el.value(q, a));
                            for s in 0..d {
                                grad[c * d + s] += val.scale(el.grad(q, a, s));
                            }
                        }
                    }
                    out.iter_mut().for_each(|v| *v = S::zero());
                    f(&x[..d], &u, &grad, &mut out)?;
                    for (acc, v) in acc.iter_mut().zip(&out) {
                        *acc += v.scale(el.weights[q]);
                    }
                }
                Ok(acc)
            })
            .collect();
        let per_element = per_element.into_iter().collect::<Result<Vec<_>>>()?;
        Ok((0..outputs)
            .map(|k| {
                let column: Vec<S> = per_element.iter().map(|v| v[k]).collect();
                pairwise(&column)
            })
            .collect())
    }

    /// Cell-centred gradients, `out[e * m * d + c * d + s] = ∂_s u_c` at the
    /// centre of element `e`. Exact for affine fields.
    pub fn gradient_field(&self) -> Vec<S> {
        let mesh = &self.mesh;
        let d = mesh.dim;
        let m = self.components;
        let h = mesh.h();
        let scale = 1.0 / (h * (1usize << (d - 1)) as f64);
        let mut out = vec![S::zero(); mesh.element_count() * m * d];
        let mut nodes = [0usize; 8];
        for e in 0..mesh.element_count() {
            mesh.element_nodes(e, &mut nodes);
            for c in 0..m {
                for s in 0..d {
                    let mut acc = S::zero();
                    for (a, &node) in nodes.iter().enumerate().take(1 << d) {
                        let v = self.values[node * m + c];
                        if (a >> s) & 1 == 1 {
                            acc += v;
                        } else {
                            acc -= v;
                        }
                    }
                    out[e * m * d + c * d + s] = acc.scale(scale);
                }
            }
        }
        out
    }

    /// CSV with node coordinates followed by each component (real and
    /// imaginary parts for complex fields).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.mesh.dim;
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        for c in 0..self.components {
            if S::IS_COMPLEX {
                header.push(format!("re_u{c}"));
                header.push(format!("im_u{c}"));
            } else {
                header.push(format!("u{c}"));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for node in 0..self.mesh.node_count() {
            let x = self.mesh.node_coords(node);
            let mut row: Vec<String> = x[..d].iter().map(|v| format!("{v:.17e}")).collect();
            for c in 0..self.components {
                let v = self.node_value(node, c);
                row.push(format!("{:.17e}", v.re()));
                if S::IS_COMPLEX {
                    row.push(format!("{:.17e}", v.im()));
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Binary grid: magic, version, dimension, nodes per axis, `h`,
    /// component count, complex flag, boundary flag, then the node-major
    /// values as little-endian `f64` (real and imaginary part interleaved
    /// for complex fields).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mesh = &self.mesh;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(mesh.dim as u32).to_le_bytes())?;
        w.write_all(&(mesh.extent as u32).to_le_bytes())?;
        w.write_all(&(mesh.cells_per_unit as u32).to_le_bytes())?;
        w.write_all(&(mesh.nodes_per_axis() as u32).to_le_bytes())?;
        w.write_all(&mesh.h().to_le_bytes())?;
        w.write_all(&(self.components as u32).to_le_bytes())?;
        w.write_all(&[S::IS_COMPLEX as u8, (mesh.bc == Boundary::Periodic) as u8])?;
        for v in &self.values {
            w.write_all(&v.re().to_le_bytes())?;
            if S::IS_COMPLEX {
                w.write_all(&v.im().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Io("not a grid field file".into()));
        }
        let mut word = || -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        let version = word()?;
        if version != VERSION {
            return Err(Error::Io(format!("unsupported grid field version {version}")));
        }
        let dim = word()? as usize;
        let extent = word()? as usize;
        let cells_per_unit = word()? as usize;
        let _nodes_per_axis = word()?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let components = {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            u32::from_le_bytes(b) as usize
        };
        let mut flags = [0u8; 2];
        r.read_exact(&mut flags)?;
        if (flags[0] == 1) != S::IS_COMPLEX {
            return Err(Error::Io("grid field scalar type does not match".into()));
        }
        let bc = if flags[1] == 1 { Boundary::Periodic } else { Boundary::Dirichlet };
        let mesh = Mesh::new(dim, extent, cells_per_unit, bc).map_err(|e| Error::Io(e.to_string()))?;
        let mut field = Self::zeros(&mesh, components);
        for v in field.values.iter_mut() {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            let im = if S::IS_COMPLEX {
                r.read_exact(&mut b8)?;
                f64::from_le_bytes(b8)
            } else {
                0.0
            };
            *v = S::from_parts(re, im);
        }
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn affine_gradient_is_exact() {
        let mesh = Mesh::unit_box(2, 5).unwrap();
        let u = DiscreteField::<f64>::interpolate(&mesh, 1, |x, out| out[0] = 3.0 * x[0] - 2.0 * x[1] + 1.0);
        let g = u.gradient_field();
        for e in 0..mesh.element_count() {
            assert!((g[e * 2] - 3.0).abs() < 1e-12);
            assert!((g[e * 2 + 1] + 2.0).abs() < 1e-12);
        }
        let c = DiscreteField::<f64>::interpolate(&mesh, 1, |_, out| out[0] = 4.0);
        assert!(c.gradient_field().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn periodic_sine_gradient_is_second_order() {
        let mut errs = Vec::new();
        for cpu in [32, 64] {
            let mesh = Mesh::torus(1, 1, cpu).unwrap();
            let u = DiscreteField::<f64>::interpolate(&mesh, 1, |x, out| out[0] = (2.0 * PI * x[0]).sin());
            let g = u.gradient_field();
            let h = mesh.h();
            let err = (0..mesh.element_count())
                .map(|e| (g[e] - 2.0 * PI * (2.0 * PI * (e as f64 + 0.5) * h).cos()).abs())
                .fold(0.0, f64::max);
            assert!(err < 4.0 * PI.powi(3) * h * h);
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 3.8);
    }

    #[test]
    fn integrate_polynomial() {
        let mesh = Mesh::torus(2, 2, 3).unwrap();
        let u = DiscreteField::<f64>::interpolate(&mesh, 1, |_, out| out[0] = 1.0);
        let v = u
            .integrate(2, 2, |x, u, _, out| {
                out[0] = u[0];
                out[1] = x[0] * x[1];
                Ok(())
            })
            .unwrap();
        assert!((v[0] - 4.0).abs() < 1e-12);
        assert!((v[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn binary_round_trip() {
        let mesh = Mesh::torus(2, 1, 4).unwrap();
        let u = DiscreteField::<Complex64>::interpolate(&mesh, 2, |x, out| {
            out[0] = Complex64::new(x[0], x[1]);
            out[1] = Complex64::new(-x[1], 0.5);
        });
        let mut buf = Vec::new();
        u.write_binary(&mut buf).unwrap();
        let back = DiscreteField::<Complex64>::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, u);
        assert!(DiscreteField::<f64>::read_binary(buf.as_slice()).is_err());
        let mut csv = Vec::new();
        u.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("x0,x1,re_u0,im_u0,re_u1,im_u1"));
        assert_eq!(text.lines().count(), 17);
    }
}
