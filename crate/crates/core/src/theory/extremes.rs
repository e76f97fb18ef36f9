//! The two instance-dependent quantities behind the convergence radius:
//! `max ||P sgn(x)||_2^2` over sign vectors, and the constant `t` bounding
//! `||x||_1 - ||x*||_1 >= t ||x - x*||_2` on the solution space.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Result, ZapError};
use crate::linalg::{MeasurementMatrix, ProjectionOperator};
use crate::signals::rng_from_seed;
use crate::vector;

/// Largest `N` for the `3^N` sign-vector scan.
pub const EXACT_SIGN_MAX_N: usize = 16;

/// Largest kernel dimension for exact `t`.
pub const EXACT_T_MAX_KERNEL: usize = 2;

/// Uniform angular grid added to the exact breakpoint candidates in 2-D.
const ANGLE_GRID: usize = 3600;

/// How a quantity was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Sampled { trials: usize, seed: u64 },
}

/// Provenance of `max ||P sgn||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxMode {
    Exact,
    /// Maximum over random sign vectors: a lower bound.
    SampledLowerBound,
}

/// Provenance of `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TMode {
    Exact,
    /// Minimum of `g` over random points: over-states the true `t`.
    MonteCarloEstimate,
}

impl fmt::Display for MaxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaxMode::Exact => "exact",
            MaxMode::SampledLowerBound => "sampled_lower_bound",
        })
    }
}

impl fmt::Display for TMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TMode::Exact => "exact",
            TMode::MonteCarloEstimate => "monte_carlo_estimate",
        })
    }
}

/// Sign digit `0, 1, 2` maps to `-1, 0, +1`.
#[inline]
fn digit_sign(d: u8) -> f64 {
    d as f64 - 1.0
}

/// `max ||P s||_2^2` over `s in {-1, 0, 1}^N`.
pub fn max_psgn_norm_sq(proj: &ProjectionOperator, mode: Mode) -> Result<(f64, MaxMode)> {
    let n = proj.dim();
    match mode {
        Mode::Exact => {
            if n > EXACT_SIGN_MAX_N {
                return Err(ZapError::TooLarge {
                    what: "3^N sign-vector scan",
                    size: 3u128.pow(n as u32),
                    limit: 3u128.pow(EXACT_SIGN_MAX_N as u32),
                });
            }
            Ok((exact_max_psgn(proj), MaxMode::Exact))
        }
        Mode::Sampled { trials, seed } => {
            let mut rng = rng_from_seed(seed);
            let mut best: f64 = 0.0;
            let mut s = vec![0.0; n];
            let mut ps = vec![0.0; n];
            for _ in 0..trials {
                s.iter_mut()
                    .for_each(|v| *v = digit_sign(rng.random_range(0..3u8)));
                proj.apply_into(&s, &mut ps);
                best = best.max(vector::dot(&ps, &ps));
            }
            Ok((best, MaxMode::SampledLowerBound))
        }
    }
}

/// Ternary odometer over the trailing digits of each fixed leading prefix.
/// Leading prefixes form independent chunks; within a chunk `P s` is updated
/// one column at a time. The winner of each chunk is re-evaluated from
/// scratch so the reported maximum carries no accumulated drift.
fn exact_max_psgn(proj: &ProjectionOperator) -> f64 {
    let n = proj.dim();
    if n == 0 {
        return 0.0;
    }
    let p = proj.dense();
    let lead = n.min(4);
    let rest = n - lead;
    let chunks = 3usize.pow(lead as u32);

    let eval = |digits: &[u8]| -> f64 {
        let s: Vec<f64> = digits.iter().map(|&d| digit_sign(d)).collect();
        let ps = proj.apply(&s);
        vector::dot(&ps, &ps)
    };

    let per_chunk: Vec<(f64, Vec<u8>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut digits = vec![0u8; n];
            let mut rem = c;
            for k in (0..lead).rev() {
                digits[k] = (rem % 3) as u8;
                rem /= 3;
            }
            let s: Vec<f64> = digits.iter().map(|&d| digit_sign(d)).collect();
            let mut g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| p[(i, j)] * s[j]).sum()).collect();
            let mut best = vector::dot(&g, &g);
            let mut best_digits = digits.clone();
            loop {
                // Increment the least significant (last) trailing digit.
                let mut k = n;
                let mut done = true;
                while k > lead {
                    k -= 1;
                    let col = p.column(k);
                    if digits[k] < 2 {
                        digits[k] += 1;
                        for (gi, pk) in g.iter_mut().zip(col.iter()) {
                            *gi += pk;
                        }
                        done = false;
                        break;
                    }
                    digits[k] = 0;
                    for (gi, pk) in g.iter_mut().zip(col.iter()) {
                        *gi -= 2.0 * pk;
                    }
                }
                if done {
                    break;
                }
                let v = vector::dot(&g, &g);
                if v > best {
                    best = v;
                    best_digits.copy_from_slice(&digits);
                }
            }
            let _ = rest;
            (eval(&best_digits), best_digits)
        })
        .collect();

    per_chunk.into_iter().map(|(v, _)| v).fold(0.0, f64::max)
}

/// `t` and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TEstimate {
    pub value: f64,
    pub mode: TMode,
}

/// `||x* + r u||_1 - ||x*||_1`, summed coordinate-wise to limit cancellation.
fn l1_excess(x_star: &[f64], u: &[f64], r: f64) -> f64 {
    x_star
        .iter()
        .zip(u)
        .map(|(&a, &b)| {
            let moved = a + r * b;
            if a == 0.0 {
                r * b.abs()
            } else if moved == 0.0 || moved.signum() == a.signum() {
                r * b * a.signum()
            } else {
                moved.abs() - a.abs()
            }
        })
        .sum()
}

/// `lim_{r -> 0+} g(x* + r u)`, the directional derivative of the `l1` norm.
fn directional_slope(x_star: &[f64], u: &[f64]) -> f64 {
    x_star
        .iter()
        .zip(u)
        .map(|(&a, &b)| if a == 0.0 { b.abs() } else { b * a.signum() })
        .sum()
}

/// `min_{0 < r <= m0} g(x* + r u)` for a unit kernel direction `u`.
///
/// The excess is piecewise linear in `r` with breakpoints where a coordinate
/// of `x* + r u` crosses zero, so `g = excess / r` is monotone on each piece
/// and its minimum sits at `r -> 0+`, a breakpoint, or `m0`.
pub fn min_g_along(x_star: &[f64], u: &[f64], m0: f64) -> f64 {
    let mut best = directional_slope(x_star, u);
    for (&a, &b) in x_star.iter().zip(u) {
        if a != 0.0 && b != 0.0 && a.signum() != b.signum() {
            let r = -a / b;
            if r > 0.0 && r <= m0 {
                best = best.min(l1_excess(x_star, u, r) / r);
            }
        }
    }
    best.min(l1_excess(x_star, u, m0) / m0)
}

/// Lower-bound constant `t` for the reference point `x_star`.
///
/// Exact mode parametrizes the unit sphere of `ker(A)` (two points for a
/// one-dimensional kernel, an angle for two) and minimizes over the radius per
/// direction. In two dimensions the objective is a sum of sinusoids whose
/// pieces change only where some `u_k(theta)` vanishes, so the candidates are
/// those zero angles, each piece's interior stationary point, and a uniform
/// grid.
pub fn estimate_t(a: &MeasurementMatrix, x_star: &[f64], m0: f64, mode: Mode) -> Result<TEstimate> {
    if x_star.len() != a.cols() {
        return Err(ZapError::DimensionMismatch {
            expected: a.cols(),
            got: x_star.len(),
        });
    }
    if !(m0 > 0.0) || !m0.is_finite() {
        return Err(invalid("M0", "must be positive"));
    }
    let proj = ProjectionOperator::build(a)?;
    let k = proj.kernel_dim();
    if k == 0 {
        return Err(invalid("A", "kernel is trivial; t is undefined"));
    }
    let z = proj.kernel_basis();
    let col = |j: usize| -> Vec<f64> { z.column(j).iter().copied().collect() };

    let (value, t_mode) = match mode {
        Mode::Exact => {
            if k > EXACT_T_MAX_KERNEL {
                return Err(ZapError::TooLarge {
                    what: "exact t kernel dimension",
                    size: k as u128,
                    limit: EXACT_T_MAX_KERNEL as u128,
                });
            }
            let value = if k == 1 {
                let u = col(0);
                let neg: Vec<f64> = u.iter().map(|v| -v).collect();
                min_g_along(x_star, &u, m0).min(min_g_along(x_star, &neg, m0))
            } else {
                exact_t_plane(x_star, &col(0), &col(1), m0)
            };
            (value, TMode::Exact)
        }
        Mode::Sampled { trials, seed } => {
            let mut rng = rng_from_seed(seed);
            let mut best = f64::INFINITY;
            for _ in 0..trials {
                let w: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut u = vec![0.0; a.cols()];
                for (j, wj) in w.iter().enumerate() {
                    for (ui, zij) in u.iter_mut().zip(z.column(j).iter()) {
                        *ui += wj * zij;
                    }
                }
                let nu = vector::norm2(&u);
                if nu == 0.0 {
                    continue;
                }
                u.iter_mut().for_each(|v| *v /= nu);
                let r = m0 * (1.0 - rng.random::<f64>());
                let g = l1_excess(x_star, &u, r) / r;
                if g <= 0.0 {
                    return Err(ZapError::NotMinimizer { g });
                }
                best = best.min(g);
            }
            (best, TMode::MonteCarloEstimate)
        }
    };
    if !(value > 0.0) {
        return Err(ZapError::NotMinimizer { g: value });
    }
    Ok(TEstimate { value, mode: t_mode })
}

fn exact_t_plane(x_star: &[f64], z1: &[f64], z2: &[f64], m0: f64) -> f64 {
    let dir = |theta: f64| -> Vec<f64> {
        let (s, c) = theta.sin_cos();
        z1.iter().zip(z2).map(|(a, b)| c * a + s * b).collect()
    };
    let wrap = |theta: f64| theta.rem_euclid(2.0 * PI);

    let mut breaks: Vec<f64> = Vec::new();
    for (&a, &b) in z1.iter().zip(z2) {
        if a == 0.0 && b == 0.0 {
            continue;
        }
        // a cos + b sin = rho cos(theta - phi) vanishes at phi +- pi/2.
        let phi = b.atan2(a);
        breaks.push(wrap(phi + PI / 2.0));
        breaks.push(wrap(phi - PI / 2.0));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut candidates = breaks.clone();
    candidates.extend((0..ANGLE_GRID).map(|i| 2.0 * PI * i as f64 / ANGLE_GRID as f64));
    // Stationary point of each piece, where the sign pattern is constant.
    let pieces = breaks.len().max(1);
    for i in 0..pieces {
        let (lo, hi) = if breaks.is_empty() {
            (0.0, 2.0 * PI)
        } else {
            let lo = breaks[i];
            let hi = if i + 1 < breaks.len() {
                breaks[i + 1]
            } else {
                breaks[0] + 2.0 * PI
            };
            (lo, hi)
        };
        let mid = dir(0.5 * (lo + hi));
        let weights: Vec<f64> = x_star
            .iter()
            .zip(&mid)
            .map(|(&x, &u)| if x != 0.0 { x.signum() } else { vector::sign(u) })
            .collect();
        let ca = vector::dot(&weights, z1);
        let cb = vector::dot(&weights, z2);
        if ca == 0.0 && cb == 0.0 {
            continue;
        }
        // ca cos + cb sin is smallest opposite its phase.
        let theta = cb.atan2(ca) + PI;
        for shift in [-2.0 * PI, 0.0, 2.0 * PI] {
            let th = theta + shift;
            if th > lo && th < hi {
                candidates.push(wrap(th));
            }
        }
    }
    candidates
        .into_iter()
        .map(|theta| min_g_along(x_star, &dir(theta), m0))
        .fold(f64::INFINITY, f64::min)
}

/// `min ||P sgn(x)||_2` over `x = x* + r u` sampled on the solution space with
/// `0 < r <= m0`.
pub fn min_psgn_norm_sampled(
    proj: &ProjectionOperator,
    x_star: &[f64],
    m0: f64,
    trials: usize,
    seed: u64,
) -> f64 {
    let n = proj.dim();
    let z = proj.kernel_basis();
    let k = z.ncols();
    let mut rng = rng_from_seed(seed);
    let mut best = f64::INFINITY;
    let mut x = vec![0.0; n];
    let mut ps = vec![0.0; n];
    for trial in 0..trials {
        let mut u = vec![0.0; n];
        for j in 0..k {
            let w: f64 = StandardNormal.sample(&mut rng);
            for (ui, zij) in u.iter_mut().zip(z.column(j).iter()) {
                *ui += w * zij;
            }
        }
        let nu = vector::norm2(&u);
        if nu == 0.0 {
            continue;
        }
        // Half the draws hug x* to exercise the small-radius regime.
        let r = if trial % 2 == 0 {
            m0 * (1.0 - rng.random::<f64>())
        } else {
            m0 * 10f64.powf(-6.0 * rng.random::<f64>()) * 1e-3
        };
        for ((xi, xs), ui) in x.iter_mut().zip(x_star).zip(&u) {
            *xi = xs + r * ui / nu;
        }
        proj.apply_into(&vector::sign_vec(&x), &mut ps);
        best = best.min(vector::norm2(&ps));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{g_value, l1_min_solution};
    use crate::signals::{gen_gaussian_matrix, gen_sparse_signal};
    use approx::assert_relative_eq;

    /// Brute-force oracle over {-1, 0, 1}^N with explicit vectors.
    fn brute_max_psgn(proj: &ProjectionOperator) -> f64 {
        let n = proj.dim();
        let mut best: f64 = 0.0;
        for idx in 0..3usize.pow(n as u32) {
            let mut rem = idx;
            let s: Vec<f64> = (0..n)
                .map(|_| {
                    let d = rem % 3;
                    rem /= 3;
                    d as f64 - 1.0
                })
                .collect();
            let ps = proj.apply(&s);
            best = best.max(vector::dot(&ps, &ps));
        }
        best
    }

    #[test]
    fn square_matrix_has_zero_max() {
        let a = gen_gaussian_matrix(3, 3, 1).unwrap();
        let p = ProjectionOperator::build(&a).unwrap();
        let (v, mode) = max_psgn_norm_sq(&p, Mode::Exact).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(mode, MaxMode::Exact);
    }

    #[test]
    fn single_row_matches_27_vector_enumeration() {
        let a = MeasurementMatrix::from_row_slice(1, 3, &[0.3, -1.1, 0.7]).unwrap();
        let p = ProjectionOperator::build(&a).unwrap();
        let (v, _) = max_psgn_norm_sq(&p, Mode::Exact).unwrap();
        assert_relative_eq!(v, brute_max_psgn(&p), max_relative = 1e-13);
        assert!(v <= 3.0);
    }

    #[test]
    fn exact_matches_brute_force_on_random_instances() {
        for (m, n, seed) in [(3, 7, 1u64), (6, 8, 2), (2, 9, 3), (5, 6, 4)] {
            let a = gen_gaussian_matrix(m, n, seed).unwrap();
            let p = ProjectionOperator::build(&a).unwrap();
            let (v, _) = max_psgn_norm_sq(&p, Mode::Exact).unwrap();
            assert_relative_eq!(v, brute_max_psgn(&p), max_relative = 1e-12);
            assert!(v <= n as f64);
        }
    }

    #[test]
    fn sampled_is_a_lower_bound() {
        let a = gen_gaussian_matrix(4, 9, 5).unwrap();
        let p = ProjectionOperator::build(&a).unwrap();
        let (exact, _) = max_psgn_norm_sq(&p, Mode::Exact).unwrap();
        let (sampled, mode) = max_psgn_norm_sq(&p, Mode::Sampled { trials: 500, seed: 1 }).unwrap();
        assert_eq!(mode, MaxMode::SampledLowerBound);
        assert!(sampled <= exact + 1e-12);
        assert!(sampled > 0.0);
    }

    #[test]
    fn exact_guard() {
        let a = gen_gaussian_matrix(2, 17, 5).unwrap();
        let p = ProjectionOperator::build(&a).unwrap();
        assert!(matches!(
            max_psgn_norm_sq(&p, Mode::Exact),
            Err(ZapError::TooLarge { .. })
        ));
    }

    /// 1-D oracle: scan both directions with a dense radius grid plus the
    /// breakpoints of `||x* + r u||_1`.
    #[test]
    fn one_dimensional_kernel_matches_breakpoint_oracle() {
        let a = MeasurementMatrix::from_row_slice(1, 2, &[1.0, 2.0]).unwrap();
        let x_star = l1_min_solution(&a, &[2.0]).unwrap().x;
        assert_eq!(x_star, vec![0.0, 1.0]);
        let m0 = 3.0;
        let t = estimate_t(&a, &x_star, m0, Mode::Exact).unwrap();
        let u = [2.0 / 5f64.sqrt(), -1.0 / 5f64.sqrt()];
        let mut oracle = f64::INFINITY;
        for sign in [1.0, -1.0] {
            let dir = [sign * u[0], sign * u[1]];
            for i in 1..=30000 {
                let r = m0 * i as f64 / 30000.0;
                let x = [x_star[0] + r * dir[0], x_star[1] + r * dir[1]];
                oracle = oracle.min(g_value(&x, &x_star).unwrap());
            }
        }
        // Hand value: along +u, g = (2 - 1)/sqrt(5) below the breakpoint r = sqrt(5).
        assert_relative_eq!(t.value, 1.0 / 5f64.sqrt(), max_relative = 1e-12);
        assert!(t.value <= oracle + 1e-12);
        assert!(oracle - t.value < 1e-9);
        assert_eq!(t.mode, TMode::Exact);
    }

    #[test]
    fn two_dimensional_kernel_bounds_every_sample() {
        for seed in 0..6u64 {
            let a = gen_gaussian_matrix(6, 8, 100 + seed).unwrap();
            let x = gen_sparse_signal(8, 2, 200 + seed).unwrap();
            let y = a.apply(x.values());
            let sol = l1_min_solution(&a, &y).unwrap();
            if !sol.unique {
                continue;
            }
            let t = estimate_t(&a, &sol.x, 2.0, Mode::Exact).unwrap();
            assert!(t.value > 0.0);
            let sampled = estimate_t(&a, &sol.x, 2.0, Mode::Sampled { trials: 20000, seed }).unwrap();
            assert_eq!(sampled.mode, TMode::MonteCarloEstimate);
            assert!(
                t.value <= sampled.value + 1e-9,
                "exact {} sampled {}",
                t.value,
                sampled.value
            );
            // Dense angular scan: agreement to grid resolution.
            let p = ProjectionOperator::build(&a).unwrap();
            let z = p.kernel_basis();
            let mut scan = f64::INFINITY;
            for i in 0..200000 {
                let th = 2.0 * PI * i as f64 / 200000.0;
                let u: Vec<f64> = (0..8)
                    .map(|r| th.cos() * z[(r, 0)] + th.sin() * z[(r, 1)])
                    .collect();
                scan = scan.min(min_g_along(&sol.x, &u, 2.0));
            }
            assert!(t.value <= scan + 1e-12);
            assert!(scan - t.value < 1e-4, "scan {scan} exact {}", t.value);
        }
    }

    #[test]
    fn non_minimizer_is_detected() {
        let a = MeasurementMatrix::from_row_slice(1, 2, &[1.0, 2.0]).unwrap();
        // (2, 0) is feasible but not the l1 minimizer.
        let err = estimate_t(&a, &[2.0, 0.0], 3.0, Mode::Exact);
        assert!(matches!(err, Err(ZapError::NotMinimizer { .. })));
        let err = estimate_t(&a, &[2.0, 0.0], 3.0, Mode::Sampled { trials: 100, seed: 3 });
        assert!(matches!(err, Err(ZapError::NotMinimizer { .. })));
    }

    #[test]
    fn exact_t_guard() {
        let a = gen_gaussian_matrix(3, 6, 1).unwrap();
        let err = estimate_t(&a, &[0.0; 6], 1.0, Mode::Exact);
        assert!(matches!(err, Err(ZapError::TooLarge { .. })));
    }

    #[test]
    fn slope_matches_big_g() {
        let x_star = vec![0.5, 0.0, -0.2, 0.0];
        let u = vec![0.5, -0.5, 0.5, 0.5];
        let g = crate::oracle::big_g_value(&u, &x_star, &[0, 2]).unwrap();
        assert_relative_eq!(directional_slope(&x_star, &u), g, epsilon = 1e-15);
    }
}
