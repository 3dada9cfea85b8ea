//! Effective bianisotropic constitutive matrices of dispersive media in the
//! Laplace domain.

pub mod effective;
pub mod medium;

pub use effective::{
    effective_constitutive, effective_routes, p_sweep, sweep_table, BianisotropicMatrix, BlockErrors, Matrix3c, RoutePair,
};
pub use medium::{build_tilde_a, Block, BlockTerm, DispersiveMedium, KernelFamily, KernelTerm, MediumSpec, TildeField};
