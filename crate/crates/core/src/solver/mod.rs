//! Q1 finite elements on uniform box meshes with Krylov solvers.

pub mod assemble;
pub mod element;
pub mod field;
pub mod krylov;
pub mod mesh;
pub mod sparse;

pub use assemble::{assemble, assemble_matrix, assemble_rhs, BilinearProblem, LinearSystem};
pub use element::Q1Element;
pub use field::DiscreteField;
pub use krylov::{solve, solve_spd, Method, SolveStats, SolverOptions};
pub use mesh::{Boundary, DofMap, Mesh};
pub use sparse::CsrMatrix;
