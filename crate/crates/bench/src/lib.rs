//! Fixtures shared by the benchmark targets.

use zap_core::signals::RecoveryProblem;

/// Noiseless Gaussian instance with a unit-norm `s`-sparse truth.
pub fn fixture(m: usize, n: usize, s: usize, seed: u64) -> RecoveryProblem {
    RecoveryProblem::sparse(m, n, s, f64::INFINITY, seed).expect("fixture parameters are valid")
}
