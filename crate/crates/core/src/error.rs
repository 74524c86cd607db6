use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::resonances::Rect;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("evaluation point {z} is within {distance:e} of the pole {pole}")]
    PoleHit { z: Complex64, pole: Complex64, distance: f64 },

    #[error("confluent singularities in Cauchy kernel (separation {separation:e})")]
    DegenerateConfluence { separation: f64 },

    #[error("integral over [0, inf) does not converge (total pole order {order} < 2)")]
    NonConvergent { order: u32 },

    #[error("evaluation point {z} lies on the branch cut of the requested sheet")]
    OnBranchCut { z: Complex64 },

    #[error("matrix is numerically singular (sigma_min = {sigma_min:e})")]
    NearSingular { sigma_min: f64 },

    #[error("identity violated: {what} (defect {defect:e}, tolerance {tolerance:e})")]
    IdentityViolation { what: &'static str, defect: f64, tolerance: f64 },

    #[error("det L+ vanishes on the contour and dilation did not help")]
    BoundaryZero,

    #[error("bisection depth exhausted with {} unresolved sub-rectangles", unresolved.len())]
    MaxDepthExceeded { unresolved: Vec<Rect> },

    #[error("continuation lost at eps = {eps}: {reason}")]
    ContinuationLost { eps: f64, reason: &'static str, last_good: Vec<(f64, Vec<Complex64>)> },

    #[error("pole at {zeta} is not simple (order-2 coefficient ratio {ratio:e})")]
    HigherOrderPole { zeta: Complex64, ratio: f64 },

    #[error("no pole at {zeta} (residue norm {norm:e})")]
    NoPole { zeta: Complex64, norm: f64 },

    #[error("truncation tail is {ratio:e} of the result")]
    TailTooFat { ratio: f64 },

    #[error("positive-axis data has no Hardy extension (residual {residual:e})")]
    ExtensionIllposed { residual: f64 },

    #[error("no convergence: {what}")]
    NoConvergence { what: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
