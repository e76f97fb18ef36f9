//! Seeded generation of measurement matrices, sparse and compressible signals,
//! and measurement noise.
//!
//! All randomness flows through [`ChaCha8Rng`] seeded from a `u64`, so identical
//! parameters and seeds give bitwise-identical outputs.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{invalid, Result, ZapError};
use crate::linalg::MeasurementMatrix;
use crate::vector;

/// Golden-ratio increment used to spread trial seeds.
pub const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of trial `k` of an experiment.
pub fn trial_seed(master_seed: u64, k: u64) -> u64 {
    master_seed ^ (k.wrapping_add(1)).wrapping_mul(SEED_STRIDE)
}

/// Independent sub-stream seed (splitmix64 finalizer over `seed + stream`).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(SEED_STRIDE));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exactly `S`-sparse signal with unit energy.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl SparseSignal {
    /// Wraps `values`, checking unit norm. The support is the set of nonzeros.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let norm = vector::norm2(&values);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid("values", format!("expected unit l2 norm, got {norm}")));
        }
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(SparseSignal { values, support })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sorted support indices.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Signal whose sorted magnitudes follow `R * i^(-1/p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressibleSignal {
    values: Vec<f64>,
    p: f64,
    magnitude: f64,
}

impl CompressibleSignal {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// `C_p = (1/p - 1)^{-1}`.
    pub fn c_p(&self) -> f64 {
        compressible_c_p(self.p)
    }

    /// `D_p = (2/p - 1)^{-1/2}`.
    pub fn d_p(&self) -> f64 {
        compressible_d_p(self.p)
    }
}

pub fn compressible_c_p(p: f64) -> f64 {
    1.0 / (1.0 / p - 1.0)
}

pub fn compressible_d_p(p: f64) -> f64 {
    (2.0 / p - 1.0).powf(-0.5)
}

/// Ground truth attached to a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Sparse(SparseSignal),
    Compressible(CompressibleSignal),
    /// A reference vector without generator metadata.
    Plain(Vec<f64>),
}

impl Truth {
    pub fn values(&self) -> &[f64] {
        match self {
            Truth::Sparse(s) => s.values(),
            Truth::Compressible(c) => c.values(),
            Truth::Plain(v) => v,
        }
    }
}

/// Generator metadata carried alongside a problem on disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProblemMeta {
    pub seed: Option<u64>,
    pub sparsity: Option<usize>,
    pub p: Option<f64>,
    pub magnitude: Option<f64>,
    pub snr_db: Option<f64>,
}

/// `A`, observation `y`, optional truth and noise bound `epsilon`.
#[derive(Debug, Clone)]
pub struct RecoveryProblem {
    pub a: MeasurementMatrix,
    pub y: Vec<f64>,
    pub truth: Option<Truth>,
    pub epsilon: f64,
    pub meta: ProblemMeta,
}

impl RecoveryProblem {
    pub fn new(a: MeasurementMatrix, y: Vec<f64>, truth: Option<Truth>, epsilon: f64) -> Result<Self> {
        if y.len() != a.rows() {
            return Err(ZapError::DimensionMismatch {
                expected: a.rows(),
                got: y.len(),
            });
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(invalid("epsilon", "must be finite and nonnegative"));
        }
        if let Some(t) = &truth {
            let x = t.values();
            if x.len() != a.cols() {
                return Err(ZapError::DimensionMismatch {
                    expected: a.cols(),
                    got: x.len(),
                });
            }
            let res = a.residual_norm(x, &y);
            let allowed = if epsilon == 0.0 {
                1e-10 * vector::norm2(&y).max(1.0)
            } else {
                epsilon * (1.0 + 1e-12)
            };
            if res > allowed {
                return Err(invalid(
                    "truth",
                    format!("||y - A x|| = {res:e} exceeds the bound {allowed:e}"),
                ));
            }
        }
        Ok(RecoveryProblem {
            a,
            y,
            truth,
            epsilon,
            meta: ProblemMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: ProblemMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn truth_values(&self) -> Option<&[f64]> {
        self.truth.as_ref().map(Truth::values)
    }

    /// Gaussian `A`, `S`-sparse truth and optional noise at `snr_db`, all from
    /// one seed. Sub-streams: matrix 1, signal 2, noise 3.
    pub fn sparse(m: usize, n: usize, s: usize, snr_db: f64, seed: u64) -> Result<Self> {
        let a = gen_gaussian_matrix(m, n, derive_seed(seed, 1))?;
        let x = gen_sparse_signal(n, s, derive_seed(seed, 2))?;
        let clean = a.apply(x.values());
        let (y, eps) = if snr_db.is_infinite() && snr_db > 0.0 {
            (clean, 0.0)
        } else {
            add_noise(&clean, snr_db, derive_seed(seed, 3))?
        };
        let meta = ProblemMeta {
            seed: Some(seed),
            sparsity: Some(s),
            snr_db: Some(snr_db),
            ..Default::default()
        };
        Ok(RecoveryProblem::new(a, y, Some(Truth::Sparse(x)), eps)?.with_meta(meta))
    }
}

/// `M x N` matrix with i.i.d. `N(0, 1/M)` entries, drawn in row-major order.
pub fn gen_gaussian_matrix(m: usize, n: usize, seed: u64) -> Result<MeasurementMatrix> {
    if m == 0 || m > n {
        return Err(ZapError::InvalidShape {
            rows: m,
            cols: n,
            reason: "need 1 <= M <= N",
        });
    }
    let dist = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("finite std dev");
    let mut attempt_seed = seed;
    let mut last_err = None;
    for attempt in 0..=3u64 {
        let mut rng = rng_from_seed(attempt_seed);
        let data: Vec<f64> = (0..m * n).map(|_| dist.sample(&mut rng)).collect();
        match MeasurementMatrix::new(DMatrix::from_row_slice(m, n, &data)) {
            Ok(a) => return Ok(a),
            Err(e @ ZapError::RankDeficient { .. }) => {
                last_err = Some(e);
                attempt_seed = derive_seed(seed, 1000 + attempt);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Uniform random support of size `S`, standard-normal nonzeros, unit norm.
pub fn gen_sparse_signal(n: usize, s: usize, seed: u64) -> Result<SparseSignal> {
    if s == 0 || s > n {
        return Err(ZapError::InvalidSparsity { s, n });
    }
    let mut rng = rng_from_seed(seed);
    let mut support = index::sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut values = vec![0.0; n];
    for &i in &support {
        // Resample exact zeros so the support size is exact.
        let mut v: f64 = StandardNormal.sample(&mut rng);
        while v == 0.0 {
            v = StandardNormal.sample(&mut rng);
        }
        values[i] = v;
    }
    let norm = vector::norm2(&values);
    values.iter_mut().for_each(|v| *v /= norm);
    let signal = SparseSignal { values, support };
    debug_assert_eq!(
        signal.values.iter().filter(|v| **v != 0.0).count(),
        signal.support.len()
    );
    debug_assert!((vector::norm2(&signal.values) - 1.0).abs() <= 1e-12);
    Ok(signal)
}

/// `i`-th largest magnitude equal to `R * i^(-1/p)`, random signs and positions.
pub fn gen_compressible_signal(n: usize, p: f64, r: f64, seed: u64) -> Result<CompressibleSignal> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", format!("must lie in (0, 1), got {p}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("R", format!("must be positive, got {r}")));
    }
    if n == 0 {
        return Err(invalid("N", "must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng);
    let mut values = vec![0.0; n];
    for (rank, &pos) in positions.iter().enumerate() {
        let mag = r * ((rank + 1) as f64).powf(-1.0 / p);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        values[pos] = sign * mag;
    }
    Ok(CompressibleSignal {
        values,
        p,
        magnitude: r,
    })
}

/// Adds white Gaussian noise scaled so that `20 log10(||y|| / ||e||)` equals
/// `target_snr_db` exactly. Returns the noisy vector and the realized `||e||`.
/// A target of `+inf` returns `y` unchanged with `epsilon = 0`.
pub fn add_noise(y: &[f64], target_snr_db: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if target_snr_db == f64::INFINITY {
        return Ok((y.to_vec(), 0.0));
    }
    if !target_snr_db.is_finite() {
        return Err(invalid("snr_db", "must be finite or +inf"));
    }
    let y_norm = vector::norm2(y);
    if y_norm == 0.0 {
        return Err(ZapError::ZeroSignal);
    }
    let mut rng = rng_from_seed(seed);
    let mut e: Vec<f64> = (0..y.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let e_norm = vector::norm2(&e);
    if e_norm == 0.0 {
        return Err(ZapError::ZeroSignal);
    }
    let target = y_norm * 10f64.powf(-target_snr_db / 20.0);
    e.iter_mut().for_each(|v| *v *= target / e_norm);
    let noisy: Vec<f64> = y.iter().zip(&e).map(|(a, b)| a + b).collect();
    let eps = vector::dist2(&noisy, y);
    Ok((noisy, eps))
}

/// Best `S`-term approximation and the tail norms `||x - x_S||_1`, `||x - x_S||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BestApprox {
    pub approx: Vec<f64>,
    pub tail_l1: f64,
    pub tail_l2: f64,
}

/// Keeps the `S` largest magnitudes; ties go to the lower index.
pub fn best_s_approx(x: &[f64], s: usize) -> Result<BestApprox> {
    if s == 0 || s > x.len() {
        return Err(ZapError::InvalidSparsity { s, n: x.len() });
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    let mut approx = vec![0.0; x.len()];
    for &i in &order[..s] {
        approx[i] = x[i];
    }
    let tail: Vec<f64> = order[s..].iter().map(|&i| x[i]).collect();
    Ok(BestApprox {
        approx,
        tail_l1: vector::norm1(&tail),
        tail_l2: vector::norm2(&tail),
    })
}
