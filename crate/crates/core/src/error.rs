use std::io;

use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum ZapError {
    #[error("measurement matrix is rank deficient (sigma_min / sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid shape {rows}x{cols}: {reason}")]
    InvalidShape {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("invalid sparsity {s} for signal length {n}")]
    InvalidSparsity { s: usize, n: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("signal has zero energy")]
    ZeroSignal,

    #[error("matrix column {0} is zero")]
    ZeroColumn(usize),

    #[error("initial point is outside the solution space: residual {residual:e} > allowed {allowed:e}")]
    InitOutOfSolutionSpace { residual: f64, allowed: f64 },

    #[error("enumeration too large: {what} ({size} > {limit})")]
    TooLarge {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("reference point is not the unique l1 minimizer: g = {g:e} at a sampled point")]
    NotMinimizer { g: f64 },

    #[error("mu = {mu} outside (1, {upper}]")]
    MuOutOfRange { mu: f64, upper: f64 },

    #[error("K_min = {k_min} must exceed max|P sgn|^2 / (2t) = {floor}")]
    KMinTooSmall { k_min: f64, floor: f64 },

    #[error("K_0 = {k0} must exceed max|P sgn|^2 / (2t) = {floor}")]
    K0TooSmall { k0: f64, floor: f64 },

    #[error("x equals the reference point; g is undefined there")]
    DegenerateInput,

    #[error("no candidate support fits the observation")]
    Infeasible,

    #[error("every square column subset is singular")]
    Degenerate,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ZapError {
    /// True for failures caused by bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            ZapError::InvalidParameter { .. }
                | ZapError::InvalidSparsity { .. }
                | ZapError::InvalidShape { .. }
                | ZapError::DimensionMismatch { .. }
                | ZapError::Parse { .. }
                | ZapError::TooLarge { .. }
        )
    }
}

pub type Result<T, E = ZapError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> ZapError {
    ZapError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
