//! SIMP compliance minimisation on a structured hexahedral grid.
//!
//! The stiffness operator is never assembled: element matrices are applied
//! node by node, and conjugate gradients is preconditioned either by the
//! diagonal or by a geometric multigrid V-cycle.

mod filter;
mod hex8;
mod multigrid;
mod operator;
mod optimize;
mod problem;
mod simp;
mod solver;

pub use filter::DensityFilter;
pub use hex8::{elasticity_matrix, hex8_stiffness, ElementMatrix, NODE_CORNERS};
pub use optimize::{
    optimize, optimize_with, read_history_csv, thresholded_compliance, write_history_csv, IterationRecord,
    OptimizeOptions, TopOptResult,
};
pub use problem::{LoadSpec, NodeSet, PassiveSpec, ProblemSpec, SimpMaterial, SupportSpec, TopOptProblem};
pub use simp::{
    compliance_sensitivity, filtered_density, oc_update, volume_sensitivity, OcParams, VolumeModel,
};
pub use solver::{solve_equilibrium, FeSolver, FemState, Preconditioner, SolverOptions};
