//! Actual deviation against the constant-`mu` and adaptive bound sequences.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use super::config::{ExperimentConfig, ExperimentKind};
use super::svg;
use crate::error::{invalid, Result, ZapError};
use crate::io::fmt_f64;
use crate::linalg::{max_eig_gram_inverse, ProjectionOperator};
use crate::oracle::l1_min_solution;
use crate::signals::{derive_seed, trial_seed, RecoveryProblem};
use crate::theory::{
    bound_sequence, constants, default_m0, estimate_t, max_psgn_norm_sq, BoundPoint, Ingredients, Mode,
    MuMode, TheoryConstants, EXACT_SIGN_MAX_N, EXACT_T_MAX_KERNEL,
};
use crate::vector;
use crate::zap::{SolverConfig, ZapSolver};

/// Instances drawn before giving up on a unique `l1` minimizer.
const MAX_ATTEMPTS: usize = 50;

/// Longest sequence computed when no iteration budget is given.
const MAX_LENGTH: usize = 10_000_000;

const ESTIMATE_SAMPLES: usize = 20_000;

#[derive(Debug, Clone)]
pub struct BoundCompareReport {
    /// Constants at the largest listed `mu`.
    pub constants: TheoryConstants,
    /// Whether `t` and `max ||P sgn||^2` were computed exactly.
    pub certified: bool,
    /// Instances drawn to find one with a unique minimizer.
    pub attempts: usize,
    pub gamma: f64,
    pub problem: RecoveryProblem,
    pub x_star: Vec<f64>,
    /// `||x_n - x*||_2` for every iteration, starting at `x_0`.
    pub actual: Vec<f64>,
    pub adaptive: Vec<BoundPoint>,
    pub constant: Vec<(f64, Vec<BoundPoint>)>,
    pub record_every: usize,
}

/// Draws the instance, computes constants, runs the solver and all bound
/// sequences from the same starting deviation.
///
/// Exact mode needs `N <= 16` and a kernel of dimension at most two; the
/// reference point is the `l1` minimizer from the oracle, and instances where
/// it is not unique are redrawn. With `estimate` set, larger instances use
/// sampled constants and the ground truth as reference, and the result is
/// marked uncertified.
pub fn run_bound_compare(config: &ExperimentConfig) -> Result<BoundCompareReport> {
    if config.experiment != ExperimentKind::BoundCompare {
        return Err(invalid("experiment", "expected bound_compare"));
    }
    config.validate()?;
    let (n, m, s, gamma) = (config.n, config.m[0], config.s[0], config.gamma[0]);
    let exact = n <= EXACT_SIGN_MAX_N && n - m <= EXACT_T_MAX_KERNEL;
    if !exact && !config.estimate {
        return Err(ZapError::TooLarge {
            what: "exact constants (set estimate=true for sampled ones)",
            size: n as u128,
            limit: EXACT_SIGN_MAX_N as u128,
        });
    }

    let mut attempts = 0;
    let (problem, x_star) = loop {
        if attempts == MAX_ATTEMPTS {
            return Err(ZapError::Degenerate);
        }
        let seed = trial_seed(config.master_seed, attempts as u64);
        attempts += 1;
        let p = RecoveryProblem::sparse(m, n, s, config.snr_db[0], seed)?;
        if exact {
            let sol = l1_min_solution(&p.a, &p.y)?;
            if sol.unique {
                break (p, sol.x);
            }
        } else {
            let truth = p.truth_values().expect("generated problems carry truth").to_vec();
            break (p, truth);
        }
    };

    let proj = ProjectionOperator::build(&problem.a)?;
    let x0 = proj.least_squares_point(&problem.y)?;
    let start = vector::dist2(&x0, &x_star);
    let m0 = default_m0(&x0, Some(&x_star));
    let sample_seed = derive_seed(config.master_seed, 7);
    let mode = if exact {
        Mode::Exact
    } else {
        Mode::Sampled {
            trials: ESTIMATE_SAMPLES,
            seed: sample_seed,
        }
    };
    let (max_sq, max_mode) = max_psgn_norm_sq(&proj, mode)?;
    let t = estimate_t(&problem.a, &x_star, m0, mode)?;
    let mu_top = config.mu.iter().copied().fold(f64::NAN, f64::max);
    let consts = constants(
        Ingredients {
            t: t.value,
            t_mode: t.mode,
            max_psgn_sq: max_sq,
            max_mode,
            lambda: max_eig_gram_inverse(&problem.a),
            m0,
            n,
        },
        mu_top,
    )?;

    let cap = if config.max_iters > 0 {
        config.max_iters
    } else {
        MAX_LENGTH
    };
    let adaptive = bound_sequence(start, gamma, t.value, max_sq, MuMode::Adaptive, cap)?;
    let mut constant = Vec::new();
    for &mu in &config.mu {
        constant.push((
            mu,
            bound_sequence(start, gamma, t.value, max_sq, MuMode::Const(mu), cap)?,
        ));
    }
    let steps = if config.max_iters > 0 {
        config.max_iters
    } else {
        constant
            .iter()
            .map(|(_, c)| c.len())
            .chain([adaptive.len()])
            .max()
            .unwrap_or(1)
            - 1
    };

    let solver = ZapSolver::with_projection(
        &problem,
        proj,
        SolverConfig {
            gamma,
            max_iters: steps.max(1),
            plateau_window: 0,
            record_every: steps.max(1),
            ..SolverConfig::default()
        },
    )?;
    let mut actual = Vec::with_capacity(steps + 1);
    solver.run_with(Some(&x0), None, |_, x| {
        actual.push(vector::dist2(x, &x_star));
        ControlFlow::Continue(())
    })?;

    Ok(BoundCompareReport {
        certified: consts.is_exact(),
        constants: consts,
        attempts,
        gamma,
        problem,
        x_star,
        actual,
        adaptive,
        constant,
        record_every: config.record_every,
    })
}

impl BoundCompareReport {
    /// Iterations covered by the actual run.
    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    /// CSV `iter,actual,adaptive,const_mu_<mu>...,mu_n_minus_1`, one row per
    /// `record_every` iterations. Cells past the end of a truncated sequence
    /// are left empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,actual,adaptive");
        for (mu, _) in &self.constant {
            let _ = write!(s, ",const_mu_{mu}");
        }
        s.push_str(",mu_n_minus_1\n");
        let len = self
            .constant
            .iter()
            .map(|(_, c)| c.len())
            .chain([self.adaptive.len(), self.actual.len()])
            .max()
            .unwrap_or(0);
        let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for i in (0..len).filter(|i| i % self.record_every == 0 || i + 1 == len) {
            let _ = write!(
                s,
                "{i},{},{}",
                cell(self.actual.get(i).copied()),
                cell(self.adaptive.get(i).map(|p| p.dev))
            );
            for (_, c) in &self.constant {
                let _ = write!(s, ",{}", cell(c.get(i).map(|p| p.dev)));
            }
            let _ = writeln!(s, ",{}", cell(self.adaptive.get(i).map(|p| p.mu_n - 1.0)));
        }
        s
    }

    /// Deviation curves on a logarithmic ordinate.
    pub fn to_svg(&self) -> String {
        let thin = |vals: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
            let stride = (vals.len() / 1500).max(1);
            let last = vals.len().saturating_sub(1);
            vals.into_iter()
                .enumerate()
                .filter(|(i, _)| i % stride == 0 || *i == last)
                .map(|(_, p)| p)
                .collect()
        };
        let seq = |c: &[BoundPoint]| thin(c.iter().enumerate().map(|(i, p)| (i as f64, p.dev)).collect());
        let mut series = vec![
            svg::Series {
                label: "actual".into(),
                points: thin(
                    self.actual
                        .iter()
                        .enumerate()
                        .map(|(i, d)| (i as f64, *d))
                        .collect(),
                ),
            },
            svg::Series {
                label: "adaptive mu".into(),
                points: seq(&self.adaptive),
            },
        ];
        for (mu, c) in &self.constant {
            series.push(svg::Series {
                label: format!("mu = {mu}"),
                points: seq(c),
            });
        }
        series.push(svg::Series {
            label: "mu_n - 1".into(),
            points: thin(
                self.adaptive
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i as f64, p.mu_n - 1.0))
                    .collect(),
            ),
        });
        let tag = if self.certified {
            "exact constants"
        } else {
            "estimated constants, not certified"
        };
        svg::Chart {
            title: format!(
                "deviation and bound sequences (N={}, M={}, gamma={:e}, {tag})",
                self.problem.a.cols(),
                self.problem.a.rows(),
                self.gamma
            ),
            x_label: "iteration".into(),
            y_label: "||x_n - x*||_2".into(),
            log_x: false,
            log_y: true,
            series,
        }
        .render()
    }
}
