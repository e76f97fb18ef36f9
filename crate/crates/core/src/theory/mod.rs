//! Constants, conditions and bounds from the convergence analysis.

pub mod bounds;
pub mod conditions;
pub mod extremes;

pub use bounds::{
    bound_sequence, bound_sequence_csv, compressible_deviation_bound, constants, default_m0, held,
    rate_bound_lemma2, rate_bound_theorem6, BoundPoint, CompressibleBoundInput, Ingredients, MuMode,
    TheoryConstants,
};
pub use conditions::{binomial, check_conditions, coherence, rip_constant, ConditionReport};
pub use extremes::{
    estimate_t, max_psgn_norm_sq, min_g_along, min_psgn_norm_sampled, MaxMode, Mode, TEstimate, TMode,
    EXACT_SIGN_MAX_N, EXACT_T_MAX_KERNEL,
};

use crate::error::Result;
use crate::linalg::{MeasurementMatrix, ProjectionOperator};

/// Samples used when an exact computation is out of reach.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Computes every constant for `a` around the reference point `x_star`,
/// exactly where the instance is small enough and by sampling otherwise.
pub fn analyze(
    a: &MeasurementMatrix,
    x_star: &[f64],
    m0: f64,
    mu: f64,
    seed: u64,
) -> Result<TheoryConstants> {
    let proj = ProjectionOperator::build(a)?;
    let sampled = Mode::Sampled {
        trials: DEFAULT_SAMPLES,
        seed,
    };
    let max_mode = if a.cols() <= EXACT_SIGN_MAX_N {
        Mode::Exact
    } else {
        sampled
    };
    let t_mode = if proj.kernel_dim() <= EXACT_T_MAX_KERNEL {
        Mode::Exact
    } else {
        sampled
    };
    let (max_psgn_sq, max_used) = max_psgn_norm_sq(&proj, max_mode)?;
    let t = estimate_t(a, x_star, m0, t_mode)?;
    constants(
        Ingredients {
            t: t.value,
            t_mode: t.mode,
            max_psgn_sq,
            max_mode: max_used,
            lambda: crate::linalg::max_eig_gram_inverse(a),
            m0,
            n: a.cols(),
        },
        mu,
    )
}
