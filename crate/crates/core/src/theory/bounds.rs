//! Convergence constants, bound sequences and iteration-count bounds.

use std::fmt;

use crate::error::{invalid, Result, ZapError};
use crate::signals::{compressible_c_p, compressible_d_p};
use crate::theory::extremes::{MaxMode, TMode};
use crate::vector;

/// Constants of the convergence analysis for one instance and `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    pub t: f64,
    pub t_mode: TMode,
    pub max_psgn_sq: f64,
    pub max_mode: MaxMode,
    pub mu: f64,
    /// Radius factor of the attracting neighborhood: `(mu / 2t) max ||P sgn||^2`.
    pub k: f64,
    /// Guaranteed per-step decrease factor: `(mu - 1) max ||P sgn||^2`.
    pub d: f64,
    /// Largest eigenvalue of `(A A^T)^{-1}`.
    pub lambda: f64,
    /// Noise amplification `(2 / t) sqrt(N lambda)`.
    pub c: f64,
    pub m0: f64,
}

impl TheoryConstants {
    /// Whether every ingredient was computed rather than estimated.
    pub fn is_exact(&self) -> bool {
        self.t_mode == TMode::Exact && self.max_mode == MaxMode::Exact
    }

    /// Radius `K gamma` of the certified neighborhood.
    pub fn radius(&self, gamma: f64) -> f64 {
        self.k * gamma
    }

    /// Noisy steady-state bound `K gamma + C eps`.
    pub fn noisy_radius(&self, gamma: f64, epsilon: f64) -> f64 {
        self.k * gamma + self.c * epsilon
    }
}

impl fmt::Display for TheoryConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "t={:.16e}", self.t)?;
        writeln!(f, "t_mode={}", self.t_mode)?;
        writeln!(f, "max_psgn_sq={:.16e}", self.max_psgn_sq)?;
        writeln!(f, "max_mode={}", self.max_mode)?;
        writeln!(f, "mu={:.16e}", self.mu)?;
        writeln!(f, "K={:.16e}", self.k)?;
        writeln!(f, "d={:.16e}", self.d)?;
        writeln!(f, "lambda={:.16e}", self.lambda)?;
        writeln!(f, "C={:.16e}", self.c)?;
        writeln!(f, "M0={:.16e}", self.m0)
    }
}

/// Measured inputs to [`constants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ingredients {
    pub t: f64,
    pub t_mode: TMode,
    pub max_psgn_sq: f64,
    pub max_mode: MaxMode,
    pub lambda: f64,
    pub m0: f64,
    pub n: usize,
}

pub fn constants(ing: Ingredients, mu: f64) -> Result<TheoryConstants> {
    if !(mu > 1.0) {
        return Err(invalid("mu", format!("must exceed 1, got {mu}")));
    }
    if !(ing.t > 0.0) {
        return Err(invalid("t", format!("must be positive, got {}", ing.t)));
    }
    let m = ing.max_psgn_sq;
    Ok(TheoryConstants {
        t: ing.t,
        t_mode: ing.t_mode,
        max_psgn_sq: m,
        max_mode: ing.max_mode,
        mu,
        k: mu / (2.0 * ing.t) * m,
        d: (mu - 1.0) * m,
        lambda: ing.lambda,
        c: 2.0 / ing.t * (ing.n as f64 * ing.lambda).sqrt(),
        m0: ing.m0,
    })
}

/// Default radius of the region the analysis covers: one unit beyond the
/// starting deviation, or `2 ||x0|| + 1` without a reference point.
pub fn default_m0(x0: &[f64], reference: Option<&[f64]>) -> f64 {
    match reference {
        Some(r) => vector::dist2(x0, r) + 1.0,
        None => 2.0 * vector::norm2(x0) + 1.0,
    }
}

/// How `mu` evolves along a bound sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuMode {
    Const(f64),
    Adaptive,
}

/// One point of a bound sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub dev: f64,
    pub mu_n: f64,
}

/// Upper bound on `||x_n - x*||_2` starting from `start_dev`.
///
/// `Const(mu)` removes `d gamma^2` from the squared deviation per step and
/// stops at the first point inside the `K gamma` ball. `Adaptive` iterates
/// `dev^2 - 2 gamma t dev + gamma^2 m`, which uses the best admissible `mu` at
/// every step; it stops once `mu_n = 2 t dev / (gamma m)` reaches one or the
/// sequence stops decreasing. At most `steps` transitions are taken.
pub fn bound_sequence(
    start_dev: f64,
    gamma: f64,
    t: f64,
    max_psgn_sq: f64,
    mode: MuMode,
    steps: usize,
) -> Result<Vec<BoundPoint>> {
    if !(start_dev > 0.0) || !(gamma > 0.0) || !(t > 0.0) || !(max_psgn_sq > 0.0) {
        return Err(invalid(
            "bound_sequence",
            "start_dev, gamma, t and max_psgn_sq must be positive",
        ));
    }
    let mu_of = |dev: f64| 2.0 * t * dev / (gamma * max_psgn_sq);
    let mut out = Vec::new();
    match mode {
        MuMode::Const(mu) => {
            let upper = mu_of(start_dev);
            if !(mu > 1.0) || mu > upper {
                return Err(ZapError::MuOutOfRange { mu, upper });
            }
            let k_gamma = mu / (2.0 * t) * max_psgn_sq * gamma;
            let dec = (mu - 1.0) * max_psgn_sq * gamma * gamma;
            let mut sq = start_dev * start_dev;
            out.push(BoundPoint {
                dev: start_dev,
                mu_n: mu,
            });
            let mut dev = start_dev;
            // Relative slack so an exact landing on the boundary counts as inside.
            let stop = k_gamma * (1.0 + 1e-12);
            while dev > stop && out.len() <= steps {
                sq -= dec;
                dev = sq.max(0.0).sqrt();
                out.push(BoundPoint { dev, mu_n: mu });
            }
        }
        MuMode::Adaptive => {
            let mut dev = start_dev;
            out.push(BoundPoint {
                dev,
                mu_n: mu_of(dev),
            });
            while mu_of(dev) > 1.0 && out.len() <= steps {
                let sq = dev * dev - 2.0 * gamma * t * dev + gamma * gamma * max_psgn_sq;
                let next = sq.max(0.0).sqrt();
                if next >= dev || mu_of(next) >= mu_of(dev) {
                    break;
                }
                dev = next;
                out.push(BoundPoint {
                    dev,
                    mu_n: mu_of(dev),
                });
            }
        }
    }
    Ok(out)
}

/// Value of a truncated sequence at index `i`, holding the last point.
pub fn held(seq: &[BoundPoint], i: usize) -> f64 {
    seq[i.min(seq.len() - 1)].dev
}

/// Bound sequence as CSV `iter,dev,mu_n`.
pub fn bound_sequence_csv(seq: &[BoundPoint]) -> String {
    let mut s = String::from("iter,dev,mu_n\n");
    for (i, p) in seq.iter().enumerate() {
        s.push_str(&format!("{i},{:.16e},{:.16e}\n", p.dev, p.mu_n));
    }
    s
}

/// Iterations to move from the `K_max gamma` ball into the `K_min gamma` ball.
pub fn rate_bound_lemma2(k_max: f64, k_min: f64, t: f64, max_psgn_sq: f64) -> Result<f64> {
    let floor = max_psgn_sq / (2.0 * t);
    if !(k_min > floor) {
        return Err(ZapError::KMinTooSmall { k_min, floor });
    }
    if k_max < k_min {
        return Err(invalid("K_max", "must be at least K_min"));
    }
    Ok(2.0 * (k_max - k_min) / (2.0 * t - max_psgn_sq / k_min))
}

/// Iterations from deviation at most `m0` into the `K0 gamma` ball.
pub fn rate_bound_theorem6(m0: f64, gamma: f64, t: f64, max_psgn_sq: f64, k0: f64) -> Result<f64> {
    let floor = max_psgn_sq / (2.0 * t);
    if !(k0 > floor) {
        return Err(ZapError::K0TooSmall { k0, floor });
    }
    if !(m0 > 0.0) || !(gamma > 0.0) {
        return Err(invalid("M0, gamma", "must be positive"));
    }
    Ok(m0 / (t * gamma) + k0 / t * (m0 / (k0 * gamma)).ln() + 2.0 * k0 / (2.0 * t - max_psgn_sq / k0))
}

/// Inputs of [`compressible_deviation_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressibleBoundInput {
    pub p: f64,
    pub magnitude: f64,
    pub sparsity: usize,
    pub delta_s: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub k: f64,
    /// `C + C_S`, with `C_S` supplied by the caller.
    pub c_prime: f64,
}

/// Deviation a compressible signal can be approached with:
/// `K gamma + C' eps + C' sqrt(1 + delta_S) (D_p + C_p) R S^(1/2 - 1/p)`.
pub fn compressible_deviation_bound(inp: CompressibleBoundInput) -> Result<f64> {
    if !(inp.p > 0.0 && inp.p < 1.0) {
        return Err(invalid("p", format!("must lie in (0, 1), got {}", inp.p)));
    }
    if inp.sparsity == 0 {
        return Err(invalid("S", "must be positive"));
    }
    let tail = (compressible_d_p(inp.p) + compressible_c_p(inp.p))
        * inp.magnitude
        * (inp.sparsity as f64).powf(0.5 - 1.0 / inp.p);
    Ok(inp.k * inp.gamma + inp.c_prime * inp.epsilon + inp.c_prime * (1.0 + inp.delta_s).sqrt() * tail)
}
