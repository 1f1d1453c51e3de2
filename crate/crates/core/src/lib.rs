//! Exact linear assignment with learned dual warm starts.
//!
//! The solver ([`lap`]) is generic over the floating point type; the
//! learning pipeline works in `f64`. Common `f64` instantiations are
//! aliased at the crate root.

pub mod baselines;
pub mod datagen;
pub mod duals;
pub mod lap;
pub mod matrix;
pub mod net;
pub mod scalar;
pub mod warmstart;

pub use duals::{Assignment, DualPotentials, FEAS_TOL};
pub use lap::{
    brute_force, solve_cold, solve_seeded, verify_certificate, CertificateFailure, LapError,
    SolveStats, SolverOptions,
};
pub use matrix::{CostMatrix, MatrixError};
pub use scalar::Scalar;

pub type CostMatrixF64 = matrix::CostMatrix<f64>;
pub type CostMatrixF32 = matrix::CostMatrix<f32>;
pub type DualsF64 = duals::DualPotentials<f64>;
pub type DualsF32 = duals::DualPotentials<f32>;
pub type SolutionF64 = lap::Solution<f64>;
pub type SolutionF32 = lap::Solution<f32>;
