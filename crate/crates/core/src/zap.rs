//! The zero-point attracting projection iteration.
//!
//! Each step pulls the iterate toward the origin along an attracting term and
//! projects back onto the affine solution space `{x : A x = A x0}`. For the
//! `l1` term the two stages collapse to `x <- x - gamma * P sgn(x)`.

use std::fmt;
use std::ops::ControlFlow;

use nalgebra::DMatrix;

use crate::error::{invalid, Result, ZapError};
use crate::linalg::ProjectionOperator;
use crate::signals::RecoveryProblem;
use crate::vector;

/// Default step size.
pub const DEFAULT_GAMMA: f64 = 5e-4;

/// Largest `N` for which the solver keeps a dense copy of `P`.
const DENSE_P_LIMIT: usize = 1500;

/// Steps between full recomputations of the cached `P sgn(x)`.
const RESYNC_EVERY: usize = 1024;

/// The zero-point attracting term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttractingTerm {
    /// Sub-gradient of the `l1` norm, `sgn(x)` with `sgn(0) = 0`.
    L1,
    /// Approximate gradient of a smoothed `l0` norm with shape parameter `alpha`.
    L0 { alpha: f64 },
}

impl AttractingTerm {
    fn validate(&self) -> Result<()> {
        match *self {
            AttractingTerm::L1 => Ok(()),
            AttractingTerm::L0 { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            AttractingTerm::L0 { alpha } => Err(invalid("alpha", format!("must be positive, got {alpha}"))),
        }
    }
}

impl fmt::Display for AttractingTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttractingTerm::L1 => write!(f, "l1"),
            AttractingTerm::L0 { alpha } => write!(f, "l0(alpha={alpha})"),
        }
    }
}

/// Piecewise `l0` attracting function for one coordinate.
///
/// `-a^2 x - a` on `[-1/a, 0)`, `-a^2 x + a` on `(0, 1/a]`, zero elsewhere
/// and at the origin.
#[inline]
pub fn l0_attraction(x: f64, alpha: f64) -> f64 {
    let edge = 1.0 / alpha;
    if x >= -edge && x < 0.0 {
        -alpha * alpha * x - alpha
    } else if x > 0.0 && x <= edge {
        -alpha * alpha * x + alpha
    } else {
        0.0
    }
}

/// Evaluates the attracting term entrywise.
pub fn attract(term: AttractingTerm, x: &[f64]) -> Vec<f64> {
    match term {
        AttractingTerm::L1 => vector::sign_vec(x),
        AttractingTerm::L0 { alpha } => x.iter().map(|&v| l0_attraction(v, alpha)).collect(),
    }
}

/// One iteration from `x`.
///
/// `l1`: `x - gamma * P sgn(x)`. Other terms: the attraction update
/// `x_hat = x - gamma * f(x)` followed by the projection
/// `x_hat + A^+ (A x - A x_hat)`, which keeps `A x` fixed.
pub fn zap_step(x: &[f64], proj: &ProjectionOperator, term: AttractingTerm, gamma: f64) -> Vec<f64> {
    match term {
        AttractingTerm::L1 => {
            let ps = proj.apply(&vector::sign_vec(x));
            x.iter().zip(&ps).map(|(xi, pi)| xi - gamma * pi).collect()
        }
        AttractingTerm::L0 { .. } => {
            let f = attract(term, x);
            let x_hat: Vec<f64> = x.iter().zip(&f).map(|(xi, fi)| xi - gamma * fi).collect();
            let a = proj.source();
            let level = a.apply(x);
            let gap = vector::sub(&level, &a.apply(&x_hat));
            let corr = proj.pseudo_inverse_apply(&gap);
            x_hat.iter().zip(&corr).map(|(h, c)| h + c).collect()
        }
    }
}

/// Iteration parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub max_iters: usize,
    /// Consecutive small steps required to declare a plateau; `0` disables the
    /// detector (exact fixed points still stop the run).
    pub plateau_window: usize,
    /// Plateau threshold on `||x_{n+1} - x_n||_2`, in units of `gamma`.
    pub plateau_tol: f64,
    pub attracting: AttractingTerm,
    pub record_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: DEFAULT_GAMMA,
            max_iters: 20_000,
            plateau_window: 200,
            plateau_tol: 1.5,
            attracting: AttractingTerm::L1,
            record_every: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(invalid("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        if !(self.plateau_tol >= 0.0) {
            return Err(invalid("plateau_tol", "must be nonnegative"));
        }
        self.attracting.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    Plateau,
    /// The per-iteration observer asked to stop.
    Interrupted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StopReason::MaxIters => "max_iters",
            StopReason::Plateau => "plateau",
            StopReason::Interrupted => "interrupted",
        };
        f.write_str(s)
    }
}

/// Diagnostics of one recorded iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub iter: usize,
    pub l1_norm: f64,
    pub residual: f64,
    pub deviation: Option<f64>,
}

/// Recorded run of the iteration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Iterates matching `samples`, index for index.
    pub iterates: Vec<Vec<f64>>,
    pub final_iterate: Vec<f64>,
    /// Number of steps taken.
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl Trajectory {
    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("a trajectory always has a sample")
    }
}

/// Reusable solver bound to one problem.
pub struct ZapSolver<'a> {
    problem: &'a RecoveryProblem,
    proj: ProjectionOperator,
    config: SolverConfig,
    dense_p: Option<DMatrix<f64>>,
}

impl<'a> ZapSolver<'a> {
    pub fn new(problem: &'a RecoveryProblem, config: SolverConfig) -> Result<Self> {
        let proj = ProjectionOperator::build(&problem.a)?;
        Self::with_projection(problem, proj, config)
    }

    pub fn with_projection(
        problem: &'a RecoveryProblem,
        proj: ProjectionOperator,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        if proj.source() != &problem.a {
            return Err(invalid("projection", "built from a different matrix"));
        }
        let dense_p = (matches!(config.attracting, AttractingTerm::L1)
            && proj.dim() <= DENSE_P_LIMIT
            && proj.kernel_dim() > 0)
            .then(|| proj.dense());
        Ok(ZapSolver {
            problem,
            proj,
            config,
            dense_p,
        })
    }

    pub fn projection(&self) -> &ProjectionOperator {
        &self.proj
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Least-squares start, or a checked warm start.
    pub fn initial_point(&self, x0: Option<&[f64]>) -> Result<Vec<f64>> {
        let y = &self.problem.y;
        match x0 {
            None => self.proj.least_squares_point(y),
            Some(x0) => {
                if x0.len() != self.problem.a.cols() {
                    return Err(ZapError::DimensionMismatch {
                        expected: self.problem.a.cols(),
                        got: x0.len(),
                    });
                }
                let residual = self.problem.a.residual_norm(x0, y);
                let allowed = self.problem.epsilon.max(1e-8 * vector::norm2(y));
                if residual > allowed {
                    return Err(ZapError::InitOutOfSolutionSpace { residual, allowed });
                }
                Ok(x0.to_vec())
            }
        }
    }

    /// Runs to completion, measuring deviation against `reference` if given.
    pub fn run(&self, x0: Option<&[f64]>, reference: Option<&[f64]>) -> Result<Trajectory> {
        self.run_with(x0, reference, |_, _| ControlFlow::Continue(()))
    }

    /// Runs the iteration, calling `observer(n, x_n)` for every iterate
    /// including `x_0`. Returning `Break` stops the run.
    pub fn run_with<F>(
        &self,
        x0: Option<&[f64]>,
        reference: Option<&[f64]>,
        mut observer: F,
    ) -> Result<Trajectory>
    where
        F: FnMut(usize, &[f64]) -> ControlFlow<()>,
    {
        if let Some(r) = reference {
            if r.len() != self.problem.a.cols() {
                return Err(ZapError::DimensionMismatch {
                    expected: self.problem.a.cols(),
                    got: r.len(),
                });
            }
        }
        let x = self.initial_point(x0)?;
        let cfg = &self.config;
        let mut recorder = Recorder {
            problem: self.problem,
            reference,
            record_every: cfg.record_every,
            samples: Vec::new(),
            iterates: Vec::new(),
        };
        let mut stepper = Stepper::new(self, x);

        recorder.record(0, stepper.x());
        let mut stop = StopReason::MaxIters;
        let mut calm_steps = 0usize;
        let mut n = 0usize;
        if observer(0, stepper.x()).is_break() {
            stop = StopReason::Interrupted;
        } else {
            while n < cfg.max_iters {
                let displacement = stepper.step();
                n += 1;
                recorder.maybe_record(n, stepper.x());
                if observer(n, stepper.x()).is_break() {
                    stop = StopReason::Interrupted;
                    break;
                }
                if displacement == 0.0 {
                    stop = StopReason::Plateau;
                    break;
                }
                if cfg.plateau_window > 0 {
                    if displacement <= cfg.plateau_tol * cfg.gamma {
                        calm_steps += 1;
                        if calm_steps >= cfg.plateau_window {
                            stop = StopReason::Plateau;
                            break;
                        }
                    } else {
                        calm_steps = 0;
                    }
                }
            }
        }
        let final_iterate = stepper.into_x();
        if recorder.samples.last().map(|s| s.iter) != Some(n) {
            recorder.record(n, &final_iterate);
        }
        Ok(Trajectory {
            samples: recorder.samples,
            iterates: recorder.iterates,
            final_iterate,
            iterations: n,
            stop_reason: stop,
        })
    }
}

/// Solves `problem`, measuring deviation against its truth when present.
pub fn solve(problem: &RecoveryProblem, config: &SolverConfig, x0: Option<&[f64]>) -> Result<Trajectory> {
    let solver = ZapSolver::new(problem, config.clone())?;
    solver.run(x0, problem.truth_values())
}

struct Recorder<'a> {
    problem: &'a RecoveryProblem,
    reference: Option<&'a [f64]>,
    record_every: usize,
    samples: Vec<Sample>,
    iterates: Vec<Vec<f64>>,
}

impl Recorder<'_> {
    fn maybe_record(&mut self, n: usize, x: &[f64]) {
        if n % self.record_every == 0 {
            self.record(n, x);
        }
    }

    fn record(&mut self, n: usize, x: &[f64]) {
        self.samples.push(Sample {
            iter: n,
            l1_norm: vector::norm1(x),
            residual: self.problem.a.residual_norm(x, &self.problem.y),
            deviation: self.reference.map(|r| vector::dist2(x, r)),
        });
        self.iterates.push(x.to_vec());
    }
}

/// Mutable iteration state.
enum Stepper<'s> {
    /// `l1` with cached `g = P sgn(x)`, updated column-wise when few signs flip.
    L1 {
        solver: &'s ZapSolver<'s>,
        x: Vec<f64>,
        signs: Vec<f64>,
        g: Vec<f64>,
        since_sync: usize,
    },
    /// General term through explicit attraction and projection.
    General {
        solver: &'s ZapSolver<'s>,
        x: Vec<f64>,
        level: Vec<f64>,
    },
}

impl<'s> Stepper<'s> {
    fn new(solver: &'s ZapSolver<'s>, x: Vec<f64>) -> Self {
        match solver.config.attracting {
            AttractingTerm::L1 => {
                let signs = vector::sign_vec(&x);
                let g = solver.proj.apply(&signs);
                Stepper::L1 {
                    solver,
                    x,
                    signs,
                    g,
                    since_sync: 0,
                }
            }
            AttractingTerm::L0 { .. } => {
                let level = solver.problem.a.apply(&x);
                Stepper::General { solver, x, level }
            }
        }
    }

    fn x(&self) -> &[f64] {
        match self {
            Stepper::L1 { x, .. } | Stepper::General { x, .. } => x,
        }
    }

    fn into_x(self) -> Vec<f64> {
        match self {
            Stepper::L1 { x, .. } | Stepper::General { x, .. } => x,
        }
    }

    /// Advances one step and returns `||x_{n+1} - x_n||_2`.
    fn step(&mut self) -> f64 {
        match self {
            Stepper::L1 {
                solver,
                x,
                signs,
                g,
                since_sync,
            } => {
                let gamma = solver.config.gamma;
                let mut moved = 0.0;
                for (xi, gi) in x.iter_mut().zip(g.iter()) {
                    let d = gamma * gi;
                    moved += d * d;
                    *xi -= d;
                }
                let n = x.len();
                let mut flips: Vec<(usize, f64)> = Vec::new();
                for (k, (xi, si)) in x.iter().zip(signs.iter_mut()).enumerate() {
                    let s = vector::sign(*xi);
                    if s != *si {
                        flips.push((k, s - *si));
                        *si = s;
                    }
                }
                *since_sync += 1;
                let narrow = solver.proj.kernel_dim().min(n - solver.proj.kernel_dim());
                let incremental = solver
                    .dense_p
                    .as_ref()
                    .filter(|_| *since_sync < RESYNC_EVERY && flips.len() < 4 * narrow.max(1));
                match incremental {
                    Some(p) => {
                        for &(k, delta) in &flips {
                            for (gi, pk) in g.iter_mut().zip(p.column(k).iter()) {
                                *gi += delta * pk;
                            }
                        }
                    }
                    None if !flips.is_empty() || *since_sync >= RESYNC_EVERY => {
                        solver.proj.apply_into(signs, g);
                        *since_sync = 0;
                    }
                    None => {}
                }
                moved.sqrt()
            }
            Stepper::General { solver, x, level } => {
                let gamma = solver.config.gamma;
                let f = attract(solver.config.attracting, x);
                if f.iter().all(|v| *v == 0.0) {
                    return 0.0;
                }
                let x_hat: Vec<f64> = x.iter().zip(&f).map(|(xi, fi)| xi - gamma * fi).collect();
                let gap = vector::sub(level, &solver.problem.a.apply(&x_hat));
                let corr = solver.proj.pseudo_inverse_apply(&gap);
                let mut moved = 0.0;
                for ((xi, h), c) in x.iter_mut().zip(&x_hat).zip(&corr) {
                    let next = h + c;
                    moved += (next - *xi) * (next - *xi);
                    *xi = next;
                }
                moved.sqrt()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MeasurementMatrix;
    use crate::signals::{gen_gaussian_matrix, Truth};
    use approx::assert_relative_eq;

    #[test]
    fn l1_attraction_is_sign() {
        assert_eq!(
            attract(AttractingTerm::L1, &[2.0, 0.0, -3.0]),
            vec![1.0, 0.0, -1.0]
        );
    }

    #[test]
    fn l0_attraction_branches() {
        let t = AttractingTerm::L0 { alpha: 2.0 };
        assert_relative_eq!(attract(t, &[0.25])[0], 1.0, epsilon = 1e-15);
        assert_eq!(attract(t, &[5.0])[0], 0.0);
        assert_eq!(attract(t, &[0.0])[0], 0.0);
        assert_relative_eq!(attract(t, &[-0.25])[0], -1.0, epsilon = 1e-15);
        // Closed left edge, closed right edge.
        assert_relative_eq!(attract(t, &[-0.5])[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(attract(t, &[0.5])[0], 0.0, epsilon = 1e-15);
        assert_eq!(attract(t, &[0.5000001])[0], 0.0);
    }

    #[test]
    fn l0_attraction_bounded_by_alpha() {
        let alpha = 3.0;
        for i in -200..=200 {
            let v = l0_attraction(i as f64 * 0.003, alpha);
            assert!(v.abs() <= alpha);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let a = gen_gaussian_matrix(3, 6, 1).unwrap();
        let p = ProjectionOperator::build(&a).unwrap();
        let x = vec![0.5, -0.2, 0.0, 1.0, 0.3, -0.7];
        assert_eq!(zap_step(&x, &p, AttractingTerm::L1, 0.0), x);
        assert_eq!(zap_step(&x, &p, AttractingTerm::L0 { alpha: 3.0 }, 0.0), x);
    }

    #[test]
    fn square_system_is_stationary() {
        let a = MeasurementMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]).unwrap();
        let p = ProjectionOperator::build(&a).unwrap();
        let x = vec![0.4, -1.5];
        assert_eq!(zap_step(&x, &p, AttractingTerm::L1, 0.7), x);
    }

    #[test]
    fn first_step_from_least_squares_decreases_l1() {
        let problem = RecoveryProblem::sparse(4, 6, 1, f64::INFINITY, 5).unwrap();
        let p = ProjectionOperator::build(&problem.a).unwrap();
        let x0 = p.least_squares_point(&problem.y).unwrap();
        let x1 = zap_step(&x0, &p, AttractingTerm::L1, 1e-3);
        assert!(vector::norm1(&x1) < vector::norm1(&x0));
    }

    #[test]
    fn zero_problem_stops_immediately() {
        let a = gen_gaussian_matrix(3, 5, 2).unwrap();
        let problem = RecoveryProblem::new(a, vec![0.0; 3], Some(Truth::Plain(vec![0.0; 5])), 0.0).unwrap();
        let traj = solve(&problem, &SolverConfig::default(), None).unwrap();
        assert_eq!(traj.stop_reason, StopReason::Plateau);
        assert_eq!(traj.iterations, 1);
        assert!(traj.final_iterate.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn solver_matches_reference_step() {
        let problem = RecoveryProblem::sparse(20, 50, 4, f64::INFINITY, 8).unwrap();
        let p = ProjectionOperator::build(&problem.a).unwrap();
        let cfg = SolverConfig {
            gamma: 1e-3,
            max_iters: 3000,
            plateau_window: 0,
            record_every: 1000,
            ..Default::default()
        };
        let traj = solve(&problem, &cfg, None).unwrap();
        let mut x = p.least_squares_point(&problem.y).unwrap();
        for _ in 0..3000 {
            x = zap_step(&x, &p, AttractingTerm::L1, 1e-3);
        }
        assert!(vector::dist2(&x, &traj.final_iterate) < 1e-9);
    }

    #[test]
    fn l0_solver_matches_reference_step() {
        let problem = RecoveryProblem::sparse(10, 30, 2, f64::INFINITY, 4).unwrap();
        let p = ProjectionOperator::build(&problem.a).unwrap();
        let term = AttractingTerm::L0 { alpha: 5.0 };
        let cfg = SolverConfig {
            gamma: 1e-3,
            max_iters: 500,
            plateau_window: 0,
            attracting: term,
            ..Default::default()
        };
        let traj = solve(&problem, &cfg, None).unwrap();
        let mut x = p.least_squares_point(&problem.y).unwrap();
        for _ in 0..500 {
            x = zap_step(&x, &p, term, 1e-3);
        }
        assert!(vector::dist2(&x, &traj.final_iterate) < 1e-10);
    }

    #[test]
    fn residual_is_invariant() {
        for term in [AttractingTerm::L1, AttractingTerm::L0 { alpha: 4.0 }] {
            let problem = RecoveryProblem::sparse(15, 40, 3, f64::INFINITY, 3).unwrap();
            let cfg = SolverConfig {
                gamma: 1e-3,
                max_iters: 2000,
                plateau_window: 0,
                attracting: term,
                record_every: 50,
                ..Default::default()
            };
            let traj = solve(&problem, &cfg, None).unwrap();
            let y_norm = vector::norm2(&problem.y);
            for s in &traj.samples {
                assert!(s.residual <= 1e-8 * y_norm, "{term}: residual {}", s.residual);
            }
        }
    }

    #[test]
    fn records_every_and_final() {
        let problem = RecoveryProblem::sparse(10, 20, 2, f64::INFINITY, 1).unwrap();
        let cfg = SolverConfig {
            max_iters: 250,
            plateau_window: 0,
            record_every: 100,
            ..Default::default()
        };
        let traj = solve(&problem, &cfg, None).unwrap();
        let iters: Vec<usize> = traj.samples.iter().map(|s| s.iter).collect();
        assert_eq!(iters, vec![0, 100, 200, 250]);
        assert_eq!(traj.iterates.len(), 4);
        assert_eq!(traj.stop_reason, StopReason::MaxIters);
        assert!(traj.samples.iter().all(|s| s.deviation.is_some()));
    }

    #[test]
    fn warm_start_outside_solution_space_is_rejected() {
        let problem = RecoveryProblem::sparse(5, 10, 2, f64::INFINITY, 2).unwrap();
        let err = solve(&problem, &SolverConfig::default(), Some(&[1.0; 10]));
        assert!(matches!(err, Err(ZapError::InitOutOfSolutionSpace { .. })));
    }

    #[test]
    fn warm_start_within_epsilon_is_accepted() {
        let problem = RecoveryProblem::sparse(5, 10, 2, 20.0, 2).unwrap();
        let truth = problem.truth_values().unwrap().to_vec();
        let cfg = SolverConfig {
            max_iters: 10,
            ..Default::default()
        };
        let traj = solve(&problem, &cfg, Some(&truth)).unwrap();
        let r0 = traj.samples[0].residual;
        assert!(r0 > 0.0 && r0 <= problem.epsilon * (1.0 + 1e-12));
        for s in &traj.samples {
            assert_relative_eq!(s.residual, r0, max_relative = 1e-8);
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig {
                gamma: 0.0,
                ..Default::default()
            },
            SolverConfig {
                max_iters: 0,
                ..Default::default()
            },
            SolverConfig {
                record_every: 0,
                ..Default::default()
            },
            SolverConfig {
                attracting: AttractingTerm::L0 { alpha: -1.0 },
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn observer_can_interrupt() {
        let problem = RecoveryProblem::sparse(10, 20, 2, f64::INFINITY, 1).unwrap();
        let solver = ZapSolver::new(&problem, SolverConfig::default()).unwrap();
        let traj = solver
            .run_with(None, None, |n, _| {
                if n == 7 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })
            .unwrap();
        assert_eq!(traj.iterations, 7);
        assert_eq!(traj.stop_reason, StopReason::Interrupted);
    }

    #[test]
    fn solve_is_deterministic() {
        let problem = RecoveryProblem::sparse(12, 30, 3, f64::INFINITY, 6).unwrap();
        let cfg = SolverConfig {
            max_iters: 1500,
            ..Default::default()
        };
        let a = solve(&problem, &cfg, None).unwrap();
        let b = solve(&problem, &cfg, None).unwrap();
        assert_eq!(a.final_iterate, b.final_iterate);
        assert_eq!(a.samples, b.samples);
    }
}
