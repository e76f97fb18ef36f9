//! Orthogonal matching pursuit, the greedy baseline.

use crate::error::{invalid, Result};
use crate::linalg::MeasurementMatrix;
use crate::signals::RecoveryProblem;
use crate::vector;

/// Result of a pursuit with the residual norm after every atom.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpPath {
    pub x: Vec<f64>,
    pub support: Vec<usize>,
    /// `residuals[0] = ||y||`, then one entry per selected atom.
    pub residuals: Vec<f64>,
}

/// Greedy selection by largest residual correlation, re-fitting all chosen
/// atoms by least squares after each pick. Stops after `max_atoms` atoms or
/// once the residual drops to `1e-8 ||y||`.
pub fn omp_path(a: &MeasurementMatrix, y: &[f64], max_atoms: usize) -> Result<OmpPath> {
    if max_atoms > a.rows() {
        return Err(invalid(
            "max_atoms",
            format!("{max_atoms} exceeds the number of measurements {}", a.rows()),
        ));
    }
    if y.len() != a.rows() {
        return Err(crate::ZapError::DimensionMismatch {
            expected: a.rows(),
            got: y.len(),
        });
    }
    let n = a.cols();
    let col_norms: Vec<f64> = (0..n).map(|j| vector::norm2(&a.column(j))).collect();
    let stop = 1e-8 * vector::norm2(y);
    let mut residual = y.to_vec();
    let mut support: Vec<usize> = Vec::new();
    let mut coef: Vec<f64> = Vec::new();
    let mut residuals = vec![vector::norm2(y)];

    while support.len() < max_atoms && *residuals.last().unwrap() > stop {
        let corr = a.apply_transpose(&residual);
        let pick = (0..n)
            .filter(|j| !support.contains(j) && col_norms[*j] > 0.0)
            .map(|j| (j, corr[j].abs() / col_norms[j]))
            .fold(None, |best: Option<(usize, f64)>, (j, c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((j, c)),
            });
        let Some((j, _)) = pick else { break };
        support.push(j);
        let sub = a.select_columns(&support);
        let rhs = nalgebra::DVector::from_column_slice(y);
        let svd = sub.clone().svd(true, true);
        let sol = svd
            .solve(&rhs, 1e-12 * svd.singular_values.max())
            .map_err(|e| invalid("omp", e.to_string()))?;
        coef = sol.iter().copied().collect();
        let fit = &sub * &sol;
        residual = y.iter().zip(fit.iter()).map(|(yi, fi)| yi - fi).collect();
        residuals.push(vector::norm2(&residual));
    }

    let mut x = vec![0.0; n];
    for (&j, &c) in support.iter().zip(&coef) {
        x[j] = c;
    }
    Ok(OmpPath {
        x,
        support,
        residuals,
    })
}

pub fn omp_baseline(problem: &RecoveryProblem, max_atoms: usize) -> Result<Vec<f64>> {
    omp_path(&problem.a, &problem.y, max_atoms).map(|p| p.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{derive_seed, gen_gaussian_matrix, RecoveryProblem};

    #[test]
    fn single_atom() {
        let a = gen_gaussian_matrix(6, 10, 1).unwrap();
        let y: Vec<f64> = a.column(5).iter().map(|v| 3.0 * v).collect();
        let path = omp_path(&a, &y, 1).unwrap();
        assert_eq!(path.support, vec![5]);
        assert!((path.x[5] - 3.0).abs() < 1e-12);
        assert!(path.x.iter().enumerate().all(|(j, v)| j == 5 || *v == 0.0));
    }

    #[test]
    fn planted_support_is_recovered() {
        for seed in 0..5 {
            let p = RecoveryProblem::sparse(40, 100, 3, f64::INFINITY, derive_seed(seed, 9)).unwrap();
            let x = omp_baseline(&p, 3).unwrap();
            let truth = p.truth_values().unwrap();
            let mut found = crate::oracle::support_of(&x);
            found.sort_unstable();
            assert_eq!(found, crate::oracle::support_of(truth));
            assert!(vector::dist2(&x, truth) < 1e-10);
        }
    }

    #[test]
    fn residual_decreases_per_atom() {
        let p = RecoveryProblem::sparse(30, 80, 8, 15.0, 4).unwrap();
        let path = omp_path(&p.a, &p.y, 20).unwrap();
        assert_eq!(path.residuals.len(), 21);
        for w in path.residuals.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn early_stop_and_budget() {
        let p = RecoveryProblem::sparse(20, 40, 2, f64::INFINITY, 2).unwrap();
        let path = omp_path(&p.a, &p.y, 10).unwrap();
        assert!(path.support.len() <= 10);
        assert!(*path.residuals.last().unwrap() <= 1e-8 * vector::norm2(&p.y));
        assert!(omp_baseline(&p, 21).is_err());
    }
}
