//! Multilinear (Q1) shape functions tabulated at tensor Gauss points.

use super::mesh::Mesh;
use crate::quadrature::TensorRule;

/// Q1 element data on a uniform mesh: one table serves every element.
#[derive(Debug, Clone)]
pub struct Q1Element {
    pub dim: usize,
    pub h: f64,
    pub nodes: usize,
    pub rule: TensorRule,
    /// `values[q * nodes + a]`
    pub values: Vec<f64>,
    /// `grads[(q * nodes + a) * dim + s]`, physical derivatives (÷ h).
    pub grads: Vec<f64>,
    /// Quadrature weights scaled by the element volume `h^d`.
    pub weights: Vec<f64>,
}

impl Q1Element {
    pub fn new(mesh: &Mesh, order: usize) -> Self {
        Self::with_rule(mesh.dim, mesh.h(), TensorRule::new(mesh.dim, order))
    }

    pub fn with_rule(dim: usize, h: f64, rule: TensorRule) -> Self {
        let nodes = 1usize << dim;
        let nq = rule.len();
        let mut values = vec![0.0; nq * nodes];
        let mut grads = vec![0.0; nq * nodes * dim];
        for q in 0..nq {
            let xi = rule.point(q);
            for a in 0..nodes {
                let mut v = 1.0;
                for i in 0..dim {
                    v *= if (a >> i) & 1 == 1 { xi[i] } else { 1.0 - xi[i] };
                }
                values[q * nodes + a] = v;
                for s in 0..dim {
                    let mut g = 1.0;
                    for i in 0..dim {
                        let upper = (a >> i) & 1 == 1;
                        g *= if i == s {
                            if upper {
                                1.0
                            } else {
                                -1.0
                            }
                        } else if upper {
                            xi[i]
                        } else {
                            1.0 - xi[i]
                        };
                    }
                    grads[(q * nodes + a) * dim + s] = g / h;
                }
            }
        }
        let vol = h.powi(dim as i32);
        let weights = rule.weights.iter().map(|w| w * vol).collect();
        Self {
            dim,
            h,
            nodes,
            rule,
            values,
            grads,
            weights,
        }
    }

    pub fn points(&self) -> usize {
        self.rule.len()
    }

    /// Physical coordinates of quadrature point `q` in the element whose
    /// lower corner has multi-index `corner`.
    #[inline]
    pub fn point(&self, corner: &[usize; 3], q: usize, out: &mut [f64; 3]) {
        let xi = self.rule.point(q);
        for i in 0..self.dim {
            out[i] = (corner[i] as f64 + xi[i]) * self.h;
        }
    }

    #[inline]
    pub fn value(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.nodes + a]
    }

    #[inline]
    pub fn grad(&self, q: usize, a: usize, s: usize) -> f64 {
        self.grads[(q * self.nodes + a) * self.dim + s]
    }
}
