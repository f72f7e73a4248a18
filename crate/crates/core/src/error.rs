// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced by the curve kernel, the flow integrator and the
/// diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("invalid curve data: {0}")]
    InvalidCurve(String),

    #[error("field is not normal at sample {index}: |<X, tau>| = {tangential:e} > {tol:e} * |X|")]
    NotNormal {
        index: usize,
        tangential: f64,
        tol: f64,
    },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step failed: dt fell below dt_min = {dt_min:e} at t = {t}")]
    StepFailure { dt_min: f64, t: f64 },

    #[error("point at distance {distance:e} lies outside the tube of radius {radius:e}")]
    OutsideTube { distance: f64, radius: f64 },

    #[error("Newton projection did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailure { iterations: usize, residual: f64 },

    #[error("normal graph folds: parameter map is not monotone at sample {index}")]
    FoldedGraph { index: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("negative energy gap {gap:e} at row {row}")]
    NegativeGap { row: usize, gap: f64 },

    #[error("invalid seed spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_mismatch(expected: impl ToString, got: impl ToString) -> Error {
    Error::ShapeMismatch {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
