//! Measurement matrices and the projector onto their kernel.
//!
//! The projector `P = I - A^T (A A^T)^{-1} A` and the pseudo-inverse are never
//! formed through the Gram inverse. A thin QR factorization `A^T = Q R` gives an
//! orthonormal basis `Q` of the row space, so `P v = v - Q Q^T v` and
//! `A^+ r = Q R^{-T} r`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ZapError};
use crate::vector;

/// Smallest admissible `sigma_min / sigma_max` for a measurement matrix.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Dense `M x N` measurement matrix with full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    entries: DMatrix<f64>,
    sigma_min: f64,
    sigma_max: f64,
}

impl MeasurementMatrix {
    /// Builds a matrix from row-major data and checks the full-row-rank condition.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(ZapError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows == 0 || cols == 0 {
            return Err(ZapError::InvalidShape {
                rows,
                cols,
                reason: "empty matrix",
            });
        }
        if rows > cols {
            return Err(ZapError::InvalidShape {
                rows,
                cols,
                reason: "more rows than columns",
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(ZapError::InvalidShape {
                rows,
                cols,
                reason: "non-finite entry",
            });
        }
        let sv = entries.singular_values();
        let sigma_max = sv.max();
        let sigma_min = sv.min();
        let ratio = if sigma_max > 0.0 {
            sigma_min / sigma_max
        } else {
            0.0
        };
        if ratio <= RANK_TOLERANCE {
            return Err(ZapError::RankDeficient { ratio });
        }
        Ok(MeasurementMatrix {
            entries,
            sigma_min,
            sigma_max,
        })
    }

    /// Number of measurements `M`.
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    /// Signal length `N`.
    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols(), "vector length must equal N");
        let m = self.rows();
        let mut out = vec![0.0; m];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = self.entries.column(j);
            for (o, a) in out.iter_mut().zip(col.iter()) {
                *o += a * xj;
            }
        }
        out
    }

    /// `A^T w`.
    pub fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.rows(), "vector length must equal M");
        self.entries
            .column_iter()
            .map(|col| vector::dot(col.as_slice(), w))
            .collect()
    }

    /// `||A x - y||_2`.
    pub fn residual_norm(&self, x: &[f64], y: &[f64]) -> f64 {
        vector::dist2(&self.apply(x), y)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.entries.column(j).iter().copied().collect()
    }

    /// Columns indexed by `support`, in the given order.
    pub fn select_columns(&self, support: &[usize]) -> DMatrix<f64> {
        self.entries.select_columns(support)
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }
}

/// Orthogonal projector onto `ker(A)`, applied on demand.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    source: MeasurementMatrix,
    /// Orthonormal basis of the row space of `A` (`N x M`).
    row_basis: DMatrix<f64>,
    /// `R` from `A^T = Q R`.
    r_factor: DMatrix<f64>,
    /// Orthonormal kernel basis (`N x (N - M)`), kept only when it is the
    /// narrower of the two factorizations.
    kernel_basis: Option<DMatrix<f64>>,
}

impl ProjectionOperator {
    pub fn build(a: &MeasurementMatrix) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        let qr = a.as_matrix().transpose().qr();
        let row_basis = qr.q();
        let r_factor = qr.r();
        let kernel_basis = if n - m < m {
            // QR of [A^T | I] is a full orthogonal basis whose trailing columns
            // span the orthogonal complement of the row space.
            let mut stacked = DMatrix::<f64>::zeros(n, m + n);
            stacked.columns_mut(0, m).copy_from(&a.as_matrix().transpose());
            stacked.columns_mut(m, n).fill_with_identity();
            let full = stacked.qr().q();
            Some(full.columns(m, n - m).into_owned())
        } else {
            None
        };
        Ok(ProjectionOperator {
            source: a.clone(),
            row_basis,
            r_factor,
            kernel_basis,
        })
    }

    pub fn source(&self) -> &MeasurementMatrix {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.source.cols()
    }

    /// Dimension of the kernel, `N - M`.
    pub fn kernel_dim(&self) -> usize {
        self.source.cols() - self.source.rows()
    }

    /// `P v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// `P v` written into `out`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.dim(), "vector length must equal N");
        assert_eq!(out.len(), self.dim());
        match &self.kernel_basis {
            Some(z) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for col in z.column_iter() {
                    let c = vector::dot(col.as_slice(), v);
                    for (o, q) in out.iter_mut().zip(col.iter()) {
                        *o += c * q;
                    }
                }
            }
            None => {
                out.copy_from_slice(v);
                for col in self.row_basis.column_iter() {
                    let c = vector::dot(col.as_slice(), v);
                    for (o, q) in out.iter_mut().zip(col.iter()) {
                        *o -= c * q;
                    }
                }
            }
        }
    }

    /// `A^+ r = A^T (A A^T)^{-1} r`.
    pub fn pseudo_inverse_apply(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.source.rows(), "vector length must equal M");
        let rhs = DVector::from_column_slice(r);
        let z = self
            .r_factor
            .tr_solve_upper_triangular(&rhs)
            .expect("R is nonsingular for a full-row-rank matrix");
        (&self.row_basis * z).as_slice().to_vec()
    }

    /// `x0 = A^+ y`, the minimum-norm solution of `A x = y`.
    pub fn least_squares_point(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.source.rows() {
            return Err(ZapError::DimensionMismatch {
                expected: self.source.rows(),
                got: y.len(),
            });
        }
        Ok(self.pseudo_inverse_apply(y))
    }

    /// Explicit `N x N` projector. Memory grows as `N^2`; meant for small `N`.
    pub fn dense(&self) -> DMatrix<f64> {
        match &self.kernel_basis {
            Some(z) => z * z.transpose(),
            None => {
                let n = self.dim();
                DMatrix::identity(n, n) - &self.row_basis * self.row_basis.transpose()
            }
        }
    }

    /// Orthonormal basis of `ker(A)` as columns.
    pub fn kernel_basis(&self) -> DMatrix<f64> {
        match &self.kernel_basis {
            Some(z) => z.clone(),
            None => {
                // Eigenvectors of P with eigenvalue 1.
                let k = self.kernel_dim();
                if k == 0 {
                    return DMatrix::zeros(self.dim(), 0);
                }
                let eig = self.dense().symmetric_eigen();
                let mut order: Vec<usize> = (0..self.dim()).collect();
                order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
                eig.eigenvectors.select_columns(&order[..k])
            }
        }
    }
}

/// Minimum-norm solution `x0 = A^T (A A^T)^{-1} y`.
pub fn least_squares_point(a: &MeasurementMatrix, y: &[f64]) -> Result<Vec<f64>> {
    ProjectionOperator::build(a)?.least_squares_point(y)
}

/// Largest eigenvalue of `(A A^T)^{-1}`, i.e. `1 / sigma_min(A)^2`.
pub fn max_eig_gram_inverse(a: &MeasurementMatrix) -> f64 {
    1.0 / (a.sigma_min() * a.sigma_min())
}
