//! Pull-back of coefficients and gradients to reference coordinates.
//!
//! With `F = ∇Φ(z)` (`F_rs = ∂Φ_r/∂z_s`) and `J = F⁻ᵀ`, physical gradients
//! are `∇_y w = J ∇_z w̃`. A flux matrix `A` (row `β d + j`, column
//! `α d + i`) becomes `det F · Ĵᵀ A Ĵ` with `Ĵ = diag(J, …, J)`.

use nalgebra::Matrix3;

use crate::medium::DiffeomorphismRealization;
use crate::scalar::Scalar;

/// Geometry of `Φ` at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub det: f64,
    /// `(∇Φ)⁻ᵀ`, padded to 3×3.
    pub transport: Matrix3<f64>,
}

impl Frame {
    pub fn at(real: &DiffeomorphismRealization, z: &[f64]) -> Self {
        let f = real.gradient3(z);
        let det = real.jacobian(z);
        let inv = f.try_inverse().expect("diffeomorphism gradient is invertible");
        Self {
            det,
            transport: inv.transpose(),
        }
    }

    /// `det F · Ĵᵀ A Ĵ` into `out`.
    pub fn pull_back<S: Scalar>(&self, dim: usize, m: usize, a: &[S], out: &mut [S]) {
        let md = dim * m;
        let j = &self.transport;
        let mut tmp = vec![S::zero(); md * md];
        for row in 0..md {
            for alpha in 0..m {
                for s in 0..dim {
                    let mut acc = S::zero();
                    for i in 0..dim {
                        acc += a[row * md + alpha * dim + i].scale(j[(i, s)]);
                    }
                    tmp[row * md + alpha * dim + s] = acc;
                }
            }
        }
        for beta in 0..m {
            for t in 0..dim {
                for col in 0..md {
                    let mut acc = S::zero();
                    for jj in 0..dim {
                        acc += tmp[(beta * dim + jj) * md + col].scale(j[(jj, t)]);
                    }
                    out[(beta * dim + t) * md + col] = acc.scale(self.det);
                }
            }
        }
    }

    /// `det F · Ĵᵀ v` for a physical flux `v`.
    pub fn pull_back_flux<S: Scalar>(&self, dim: usize, m: usize, v: &[S], out: &mut [S]) {
        for beta in 0..m {
            for t in 0..dim {
                let mut acc = S::zero();
                for jj in 0..dim {
                    acc += v[beta * dim + jj].scale(self.transport[(jj, t)]);
                }
                out[beta * dim + t] = acc.scale(self.det);
            }
        }
    }

    /// Physical gradient `Ĵ g` of a reference gradient `g`.
    pub fn push_gradient<S: Scalar>(&self, dim: usize, m: usize, g: &[S], out: &mut [S]) {
        for alpha in 0..m {
            for i in 0..dim {
                let mut acc = S::zero();
                for s in 0..dim {
                    acc += g[alpha * dim + s].scale(self.transport[(i, s)]);
                }
                out[alpha * dim + i] = acc;
            }
        }
    }
}
