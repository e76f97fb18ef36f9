//! Sparse recovery by zero-point attracting projection (ZAP).

pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod signals;
pub mod theory;
pub mod vector;
pub mod zap;

pub use error::{Result, ZapError};
pub use experiment::{
    reconstruction_snr, run_bound_compare, run_experiment, ExperimentConfig, ExperimentReport,
};
pub use linalg::{least_squares_point, max_eig_gram_inverse, MeasurementMatrix, ProjectionOperator};
pub use oracle::{l1_min_solution, sparsest_solution, OracleSolution};
pub use signals::{CompressibleSignal, RecoveryProblem, SparseSignal, Truth};
pub use theory::{ConditionReport, TheoryConstants};
pub use zap::{solve, AttractingTerm, SolverConfig, StopReason, Trajectory, ZapSolver};
