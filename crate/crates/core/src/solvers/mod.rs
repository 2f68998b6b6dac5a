//! Recovery algorithms.

mod bayes;
mod l0;
mod l1;

use nalgebra::DVector;

pub use bayes::bayes_two_point;
pub use l0::{solve_analysis_l0, L0Options};
pub use l1::{solve_analysis_l1, L1Options};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub x_hat: DVector<f64>,
    /// `‖Ωx̂‖₁` for the ℓ1 solver, `‖Ωx̂‖₀` for the ℓ0 solver.
    pub objective: f64,
    /// `‖y − Ax̂‖₂`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}
