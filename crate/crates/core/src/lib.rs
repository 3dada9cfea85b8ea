//! Numerical stochastic homogenization for elliptic systems whose
//! coefficients are periodic tensors composed with a random diffeomorphism
//! with stationary gradient, `A(Φ⁻¹(x/ε, ω))`.
//!
//! * [`medium`] — coefficient fields, random diffeomorphisms, estimators.
//! * [`solver`] — Q1 finite elements on uniform grids and Krylov solvers.
//! * [`corrector`] — supercell corrector problems and the effective tensor.
//! * [`convergence`] — ε → 0 validation against the homogenized problem.
//! * [`maxwell`] — effective bianisotropic constitutive matrices in the
//!   Laplace domain.

pub mod convergence;
pub mod corrector;
pub mod error;
pub mod maxwell;
pub mod medium;
pub mod quadrature;
pub mod scalar;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;
