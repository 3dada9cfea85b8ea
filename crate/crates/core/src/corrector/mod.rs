//! Corrector problems on truncated supercells and the ensemble-averaged
//! effective tensor.

pub mod cell;
pub mod ensemble;
pub mod frame;
pub mod tensor;

pub use cell::{solve_corrector, solve_directions, solve_transpose_corrector, CorrectorOptions, CorrectorSolution};
pub use ensemble::{
    assemble_homogenized, basis_directions, theta_sweep, uncorrected_average, HomogenizationConfig,
};
pub use frame::Frame;
pub use tensor::{sweep_csv, HomogenizationMeta, HomogenizedTensor};
