//! Gaussian random fields generated by convolving white noise with a
//! non-negative kernel `u`, so that the covariance is `C(x) = ∫ u(x+y) u(y) dy`.

mod covariance;
mod decompose;
mod kernel;
mod sample;
pub mod snapshot;

use thiserror::Error;

use crate::grid::GridError;

pub use covariance::{analytic_covariance, box_min_ratio, correlation_window, CovarianceForm, CovarianceSpec};
pub use decompose::{decompose, Decomposition};
pub use kernel::{make_gaussian_kernel, KernelShape, KernelSpec, KernelWarning, DEFAULT_TRUNCATION_TOLERANCE};
pub use sample::{
    empirical_covariance, empirical_covariance_where, sample_field, sample_field_with, CovarianceEstimate,
    FieldSample, SamplerConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    InvalidDimension(usize),
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("kernel is negative ({value}) at |x|_inf = {at}")]
    NegativeKernel { value: f64, at: f64 },
    #[error("kernel jump {jump} exceeds Hölder bound {bound}")]
    HolderViolation { jump: f64, bound: f64 },
    #[error("kernel value {value} exceeds decay bound {bound} at |x|_inf = {at}")]
    DecayViolation { value: f64, bound: f64, at: f64 },
    #[error("kernel mass beyond truncation radius is {ratio:e} of the total (tolerance {tolerance:e})")]
    TruncationMass { ratio: f64, tolerance: f64 },
    #[error("tabulated kernel needs (2m+1)^d samples (got {0})")]
    TableShape(usize),
    #[error("correlation window ell = {ell} gives gamma = {gamma} <= 0")]
    NonPositiveGamma { ell: f64, gamma: f64 },
    #[error("grid spacing {spacing} is coarser than the resolution limit {limit}")]
    ResolutionTooCoarse { spacing: f64, limit: f64 },
    #[error("padded noise grid needs {points} points, above the budget of {budget}")]
    PaddingOverflow { points: usize, budget: usize },
    #[error("kernel dimension {kernel} does not match grid dimension {grid}")]
    DimensionMismatch { kernel: usize, grid: usize },
    #[error("samples live on different grids")]
    MismatchedGrids,
    #[error("offset list is empty")]
    EmptyOffsets,
    #[error("need at least {needed} samples (got {got})")]
    TooFewSamples { needed: usize, got: usize },
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}
