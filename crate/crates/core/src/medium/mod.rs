//! Random media: periodic coefficient tensors, random diffeomorphisms with
//! stationary gradient, and ensemble estimators.

pub mod coefficient;
pub mod diffeo;
pub mod ergodic;
pub mod fixtures;
pub mod profile;

pub use coefficient::{
    check_ellipticity, default_sampling, flat_index, hermitian_part_min_eigenvalue, CoefTensor, CoefficientField, ConstantField,
    FnField, Transposed,
};
pub use diffeo::{sample_diffeomorphism, BumpProfile, DiffeomorphismRealization, DiffeomorphismSpec};
pub use ergodic::{
    ergodic_average, estimate_mean_gradient, null_lagrangian_check, realization_mean_gradient, EnsembleConfig, MeanGradientEstimate,
    NullLagrangianReport,
};
pub use fixtures::{fixture, reference_constant_tensor, FieldSpec, FieldTerm, FixtureOptions, TermField, FIXTURE_NAMES};
pub use profile::{ScalarProfile, TrigMode};
