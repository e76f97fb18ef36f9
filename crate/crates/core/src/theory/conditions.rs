//! Recovery conditions on the measurement matrix: exhaustive RIP constants and
//! mutual coherence.

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Result, ZapError};
use crate::linalg::MeasurementMatrix;
use crate::vector;

/// Largest number of column subsets `rip_constant` will scan.
pub const RIP_MAX_SUBSETS: u128 = 1_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exact restricted isometry constant `delta_S`.
///
/// Eigenvalues of a principal sub-Gram matrix interlace those of any larger one
/// containing it, so scanning subsets of size exactly `min(S, N)` covers every
/// `|T| <= S`. For `S > M` the constant is at least one.
pub fn rip_constant(a: &MeasurementMatrix, s: usize) -> Result<f64> {
    let n = a.cols();
    let size = s.min(n);
    if size == 0 {
        return Ok(0.0);
    }
    let count = binomial(n, size);
    if count > RIP_MAX_SUBSETS {
        return Err(ZapError::TooLarge {
            what: "RIP subset scan",
            size: count,
            limit: RIP_MAX_SUBSETS,
        });
    }
    let subsets: Vec<Vec<usize>> = (0..n).combinations(size).collect();
    let delta = subsets
        .par_iter()
        .map(|t| {
            let sub = a.select_columns(t);
            let eig = (sub.transpose() * &sub).symmetric_eigen().eigenvalues;
            (eig.max() - 1.0).max(1.0 - eig.min())
        })
        .reduce(|| 0.0, f64::max);
    Ok(delta.max(0.0))
}

/// Largest absolute inner product between distinct unit-normalized columns.
pub fn coherence(a: &MeasurementMatrix) -> Result<f64> {
    let n = a.cols();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut c = a.column(j);
        let norm = vector::norm2(&c);
        if norm == 0.0 {
            return Err(ZapError::ZeroColumn(j));
        }
        c.iter_mut().for_each(|v| *v /= norm);
        cols.push(c);
    }
    let mut mu: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            mu = mu.max(vector::dot(&cols[i], &cols[j]).abs());
        }
    }
    Ok(mu.min(1.0))
}

/// Sufficient conditions for unique and exact `l1` recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub sparsity: usize,
    /// `delta_2S`, when the exhaustive scan is affordable.
    pub delta_2s: Option<f64>,
    pub coherence: f64,
    /// `delta_2S < sqrt(2) - 1`.
    pub rip_ok: Option<bool>,
    /// `S < 1 / (3 mu(A))`.
    pub coherence_ok: bool,
}

pub fn check_conditions(a: &MeasurementMatrix, s: usize) -> Result<ConditionReport> {
    let mu = coherence(a)?;
    let delta_2s = match rip_constant(a, 2 * s) {
        Ok(d) => Some(d),
        Err(ZapError::TooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ConditionReport {
        sparsity: s,
        delta_2s,
        coherence: mu,
        rip_ok: delta_2s.map(|d| d < std::f64::consts::SQRT_2 - 1.0),
        coherence_ok: mu == 0.0 || (s as f64) < 1.0 / (3.0 * mu),
    })
}
