//! Bubnov-Galerkin analysis on planar surfaces: Poisson problems with
//! convergence studies and membrane eigenvalues.

pub mod convergence;
pub mod eigen;
pub mod galerkin;
pub mod sparse;

pub use convergence::{convergence_study, ConvergenceReport, LevelResult};
pub use eigen::{membrane_eigen, solve_generalized_eigen, unit_square_eigenvalues, EigenPairs, EigenReport};
pub use galerkin::{
    assemble, assemble_membrane_eigen, assemble_poisson, compute_errors, dirichlet_functions, evaluate_solution,
    solve_poisson, Assembly, ErrorNorms, GalerkinSystem, Manufactured, MassKind, MassMatrix,
};
pub use sparse::{CsrMatrix, SkylineCholesky};
