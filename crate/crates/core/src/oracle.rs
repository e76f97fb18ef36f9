//! Brute-force reference solutions for small instances.
//!
//! `sparsest_solution` scans supports by increasing size; `l1_min_solution`
//! scans basic solutions (square column subsets), which contain every vertex of
//! the `l1` ball intersected with the solution space. Both are exponential and
//! guarded by small-`N` limits.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Result, ZapError};
use crate::linalg::MeasurementMatrix;
use crate::vector;

pub const SPARSEST_MAX_N: usize = 14;
pub const L1_MAX_N: usize = 12;

/// Objective gap under which two candidates count as tied.
pub const UNIQUENESS_GAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    /// `||x||_0` or `||x||_1`, depending on the oracle.
    pub objective: f64,
    pub unique: bool,
}

fn fit_tolerance(y: &[f64]) -> f64 {
    1e-8 * vector::norm2(y).max(1.0)
}

/// Least-squares fit of `y` on the columns `support`; `None` if the columns are
/// dependent.
fn restricted_fit(a: &MeasurementMatrix, support: &[usize], y: &DVector<f64>) -> Option<DVector<f64>> {
    let sub = a.select_columns(support);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin / smax <= 1e-10 {
        return None;
    }
    svd.solve(y, 0.0).ok()
}

fn embed(n: usize, support: &[usize], coeffs: &DVector<f64>) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (&i, c) in support.iter().zip(coeffs.iter()) {
        x[i] = *c;
    }
    x
}

/// Minimum-`l0` solution of `A x = y` by exhaustive support search.
pub fn sparsest_solution(a: &MeasurementMatrix, y: &[f64]) -> Result<OracleSolution> {
    let (m, n) = (a.rows(), a.cols());
    if n > SPARSEST_MAX_N {
        return Err(ZapError::TooLarge {
            what: "sparsest-solution support scan",
            size: n as u128,
            limit: SPARSEST_MAX_N as u128,
        });
    }
    if y.len() != m {
        return Err(ZapError::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    let tol = fit_tolerance(y);
    if vector::norm2(y) <= tol {
        return Ok(OracleSolution {
            x: vec![0.0; n],
            objective: 0.0,
            unique: true,
        });
    }
    let yv = DVector::from_column_slice(y);
    for size in 1..=m {
        let supports: Vec<Vec<usize>> = (0..n).combinations(size).collect();
        let fits: Vec<Option<Vec<f64>>> = supports
            .par_iter()
            .map(|t| {
                let c = restricted_fit(a, t, &yv)?;
                let x = embed(n, t, &c);
                (a.residual_norm(&x, y) <= tol).then_some(x)
            })
            .collect();
        let mut found = fits.into_iter().flatten();
        if let Some(x) = found.next() {
            let unique = found.next().is_none();
            return Ok(OracleSolution {
                x,
                objective: size as f64,
                unique,
            });
        }
    }
    Err(ZapError::Infeasible)
}

/// Zero-pattern and signs, with entries below `tol` treated as zero.
fn sign_pattern(x: &[f64], tol: f64) -> Vec<i8> {
    x.iter()
        .map(|&v| {
            if v.abs() <= tol {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

fn zero_tolerance(x: &[f64]) -> f64 {
    1e-9 * vector::norm_inf(x).max(1.0)
}

/// Minimum-`l1` solution of `A x = y` by basic-solution enumeration.
pub fn l1_min_solution(a: &MeasurementMatrix, y: &[f64]) -> Result<OracleSolution> {
    let (m, n) = (a.rows(), a.cols());
    if n > L1_MAX_N {
        return Err(ZapError::TooLarge {
            what: "l1 basic-solution scan",
            size: n as u128,
            limit: L1_MAX_N as u128,
        });
    }
    if m >= n {
        return Err(invalid("A", "the l1 oracle needs M < N"));
    }
    if y.len() != m {
        return Err(ZapError::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    let yv = DVector::from_column_slice(y);
    let supports: Vec<Vec<usize>> = (0..n).combinations(m).collect();
    // Index order is lexicographic over supports; singular subsets drop out.
    let candidates: Vec<(Vec<f64>, f64)> = supports
        .par_iter()
        .filter_map(|t| {
            let sub: DMatrix<f64> = a.select_columns(t);
            let sv = sub.singular_values();
            if sv.min() <= 1e-10 * sv.max() {
                return None;
            }
            let c = sub.lu().solve(&yv)?;
            let mut x = embed(n, t, &c);
            let tol = zero_tolerance(&x);
            x.iter_mut().filter(|v| v.abs() <= tol).for_each(|v| *v = 0.0);
            let obj = vector::norm1(&x);
            Some((x, obj))
        })
        .collect();
    if candidates.is_empty() {
        return Err(ZapError::Degenerate);
    }
    let best = candidates
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.1.total_cmp(&b.1).then(i.cmp(j)))
        .map(|(i, _)| i)
        .expect("non-empty");
    let (x, objective) = candidates[best].clone();
    let pattern = sign_pattern(&x, zero_tolerance(&x));
    let unique = candidates
        .iter()
        .all(|(c, obj)| *obj > objective + UNIQUENESS_GAP || sign_pattern(c, zero_tolerance(c)) == pattern);
    Ok(OracleSolution { x, objective, unique })
}

/// `g(x) = (||x||_1 - ||x*||_1) / ||x - x*||_2`.
pub fn g_value(x: &[f64], x_star: &[f64]) -> Result<f64> {
    if x.len() != x_star.len() {
        return Err(ZapError::DimensionMismatch {
            expected: x_star.len(),
            got: x.len(),
        });
    }
    let dist = vector::dist2(x, x_star);
    if dist == 0.0 {
        return Err(ZapError::DegenerateInput);
    }
    Ok((vector::norm1(x) - vector::norm1(x_star)) / dist)
}

/// `G(u) = u_I^T sgn(x*) + ||u_{I^c}||_1` for a unit direction `u`, with `I`
/// the support of `x*`.
pub fn big_g_value(u: &[f64], x_star: &[f64], support: &[usize]) -> Result<f64> {
    if u.len() != x_star.len() {
        return Err(ZapError::DimensionMismatch {
            expected: x_star.len(),
            got: u.len(),
        });
    }
    let norm = vector::norm2(u);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(invalid("u", format!("must be a unit vector, norm is {norm}")));
    }
    let mut on = vec![false; u.len()];
    for &i in support {
        if i >= u.len() {
            return Err(invalid("support", format!("index {i} out of range")));
        }
        on[i] = true;
    }
    Ok(u.iter()
        .zip(x_star)
        .zip(&on)
        .map(|((uk, xk), &in_support)| {
            if in_support {
                uk * vector::sign(*xk)
            } else {
                uk.abs()
            }
        })
        .sum())
}

/// Support of `x` (indices of nonzero entries).
pub fn support_of(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ProjectionOperator;
    use crate::signals::{gen_gaussian_matrix, gen_sparse_signal, rng_from_seed};
    use crate::theory::coherence;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn sparsest_of_zero_is_zero() {
        let a = gen_gaussian_matrix(3, 6, 1).unwrap();
        let sol = sparsest_solution(&a, &[0.0; 3]).unwrap();
        assert_eq!(sol.x, vec![0.0; 6]);
        assert_eq!(sol.objective, 0.0);
        assert!(sol.unique);
    }

    #[test]
    fn sparsest_single_column() {
        let a = gen_gaussian_matrix(4, 7, 2).unwrap();
        let y: Vec<f64> = a.column(2).iter().map(|v| 3.0 * v).collect();
        let sol = sparsest_solution(&a, &y).unwrap();
        assert_eq!(sol.objective, 1.0);
        assert!(sol.unique);
        assert_relative_eq!(sol.x[2], 3.0, epsilon = 1e-10);
        assert_eq!(support_of(&sol.x), vec![2]);
    }

    #[test]
    fn sparsest_recovers_planted_support() {
        let a = gen_gaussian_matrix(6, 8, 11).unwrap();
        let x = gen_sparse_signal(8, 2, 12).unwrap();
        let y = a.apply(x.values());
        let sol = sparsest_solution(&a, &y).unwrap();
        assert_eq!(sol.objective, 2.0);
        assert_eq!(support_of(&sol.x), x.support());
        assert!(vector::dist2(&sol.x, x.values()) < 1e-9);
    }

    #[test]
    fn sparsest_guard() {
        let a = gen_gaussian_matrix(3, 15, 1).unwrap();
        assert!(matches!(
            sparsest_solution(&a, &[1.0; 3]),
            Err(ZapError::TooLarge { .. })
        ));
    }

    #[test]
    fn l1_two_candidate_example() {
        let a = MeasurementMatrix::from_row_slice(1, 2, &[1.0, 2.0]).unwrap();
        let sol = l1_min_solution(&a, &[2.0]).unwrap();
        assert_relative_eq!(sol.x[0], 0.0);
        assert_relative_eq!(sol.x[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-15);
        assert!(sol.unique);
    }

    #[test]
    fn l1_tie_is_not_unique() {
        let a = MeasurementMatrix::from_row_slice(1, 2, &[1.0, 1.0]).unwrap();
        let sol = l1_min_solution(&a, &[1.0]).unwrap();
        assert!(!sol.unique);
        assert_relative_eq!(sol.objective, 1.0);
    }

    #[test]
    fn l1_of_zero_is_zero() {
        let a = gen_gaussian_matrix(4, 7, 5).unwrap();
        let sol = l1_min_solution(&a, &[0.0; 4]).unwrap();
        assert_eq!(sol.x, vec![0.0; 7]);
        assert!(sol.unique);
    }

    #[test]
    fn l1_is_globally_optimal_over_sampled_feasible_points() {
        let a = gen_gaussian_matrix(5, 9, 3).unwrap();
        let x = gen_sparse_signal(9, 2, 4).unwrap();
        let y = a.apply(x.values());
        let sol = l1_min_solution(&a, &y).unwrap();
        let p = ProjectionOperator::build(&a).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..2000 {
            let v: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
            let pv = p.apply(&v);
            let cand: Vec<f64> = sol.x.iter().zip(&pv).map(|(a, b)| a + b).collect();
            assert!(vector::norm1(&cand) >= sol.objective - 1e-12);
        }
    }

    /// `[I_10 | ones/sqrt(10) | alternating/sqrt(10)]` has coherence 1/sqrt(10).
    fn low_coherence_matrix() -> MeasurementMatrix {
        let (m, n) = (10, 12);
        let mut data = vec![0.0; m * n];
        let s = 1.0 / (m as f64).sqrt();
        for i in 0..m {
            data[i * n + i] = 1.0;
            data[i * n + 10] = s;
            data[i * n + 11] = if i % 2 == 0 { s } else { -s };
        }
        MeasurementMatrix::from_row_slice(m, n, &data).unwrap()
    }

    #[test]
    fn l1_agrees_with_sparsest_under_coherence_condition() {
        let a = low_coherence_matrix();
        let mu = coherence(&a).unwrap();
        assert!(1.0 < 1.0 / (3.0 * mu));
        for col in 0..12 {
            let y: Vec<f64> = a.column(col).iter().map(|v| -1.7 * v).collect();
            let p0 = sparsest_solution(&a, &y).unwrap();
            let p1 = l1_min_solution(&a, &y).unwrap();
            assert_eq!(p0.objective, 1.0);
            assert!(p1.unique);
            let diff = vector::sub(&p0.x, &p1.x);
            assert!(vector::norm_inf(&diff) <= 1e-8, "column {col}");
        }
    }

    #[test]
    fn l1_guards() {
        let a = gen_gaussian_matrix(3, 13, 1).unwrap();
        assert!(matches!(
            l1_min_solution(&a, &[1.0; 3]),
            Err(ZapError::TooLarge { .. })
        ));
        let sq = gen_gaussian_matrix(3, 3, 1).unwrap();
        assert!(l1_min_solution(&sq, &[1.0; 3]).is_err());
    }

    #[test]
    fn g_off_support_direction() {
        let x_star = vec![0.8, 0.0, -0.6, 0.0];
        let u = vec![0.0, 0.6, 0.0, -0.8];
        let r = 0.3;
        let x: Vec<f64> = x_star.iter().zip(&u).map(|(a, b)| a + r * b).collect();
        let g = g_value(&x, &x_star).unwrap();
        assert_relative_eq!(g, vector::norm1(&u), epsilon = 1e-12);
        assert_relative_eq!(big_g_value(&u, &x_star, &[0, 2]).unwrap(), 1.4, epsilon = 1e-12);
    }

    #[test]
    fn big_g_on_support_reduces_to_inner_product() {
        let x_star = vec![2.0, -1.0, 0.0];
        let u = vec![0.6, 0.8, 0.0];
        let got = big_g_value(&u, &x_star, &[0, 1]).unwrap();
        assert_relative_eq!(got, 0.6 - 0.8, epsilon = 1e-15);
    }

    #[test]
    fn g_matches_big_g_below_first_breakpoint() {
        let a = gen_gaussian_matrix(5, 8, 21).unwrap();
        let x = gen_sparse_signal(8, 2, 22).unwrap();
        let p = ProjectionOperator::build(&a).unwrap();
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut u = p.apply(&v);
            let nu = vector::norm2(&u);
            u.iter_mut().for_each(|c| *c /= nu);
            // Smallest positive radius at which a support coordinate hits zero.
            let r_break = x
                .values()
                .iter()
                .zip(&u)
                .filter(|(xk, uk)| **xk != 0.0 && xk.signum() != uk.signum() && **uk != 0.0)
                .map(|(xk, uk)| -xk / uk)
                .fold(f64::INFINITY, f64::min);
            let r = if r_break.is_finite() { 1e-6 * r_break } else { 1e-6 };
            let pt: Vec<f64> = x.values().iter().zip(&u).map(|(a, b)| a + r * b).collect();
            let g = g_value(&pt, x.values()).unwrap();
            let big = big_g_value(&u, x.values(), x.support()).unwrap();
            assert!((g - big).abs() <= 1e-9, "g {g} vs G {big}");
        }
    }

    #[test]
    fn g_errors() {
        assert!(matches!(
            g_value(&[1.0, 2.0], &[1.0, 2.0]),
            Err(ZapError::DegenerateInput)
        ));
        assert!(big_g_value(&[1.0, 1.0], &[1.0, 0.0], &[0]).is_err());
    }
}
