//! Validation of the homogenization limit: oscillating Dirichlet problems
//! at decreasing ε against the homogenized problem.

pub mod problem;
pub mod study;

pub use problem::{
    check_scale, oscillating_coefficient, required_supercell, solve_heterogeneous, solve_homogenized,
    DirichletOptions, Source,
};
pub use study::{run_convergence_study, test_battery, ConvergenceReport, StudyConfig};
