//! Numerical laboratory for continuum Schrödinger operators `-½Δ + V` with
//! homogeneous Gaussian random potentials `V`.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: cubic cell-centred grids standing in for the cube `Λ`.
//! - [`field`]: covariance kernels `u`, covariances `C = u * u`, white-noise
//!   convolution sampling of `V` and the split `V = U + V(0)·C/C(0)`.
//! - [`operator`]: finite-difference Hamiltonians with Dirichlet or Neumann
//!   boundary conditions and eigenvalue counting / computation below a cutoff.
//! - [`ids`]: Monte Carlo integrated density of states, the trace estimator,
//!   and the Weyl-law, Gaussian-tail and density-of-states checks.
//! - [`wegner`]: the explicit Wegner constant `W(E)` and Monte Carlo
//!   verification of the Wegner inequality.
//! - [`probes`]: eigenfunction localization diagnostics (IPR, decay length).
//!
//! Ensembles are reproducible: sample `k` of a run with master seed `s` is
//! generated from ChaCha stream `k` seeded by `s`, so results do not depend on
//! how many worker threads evaluate them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod field;
pub mod grid;
pub mod ids;
pub mod operator;
pub mod probes;
pub mod wegner;

pub use ensemble::{Ensemble, SampleSeed};
pub use field::{
    analytic_covariance, correlation_window, decompose, empirical_covariance, make_gaussian_kernel,
    sample_field, CovarianceForm, CovarianceSpec, Decomposition, FieldError, FieldSample,
    KernelShape, KernelSpec,
};
pub use grid::{Grid, GridError};
pub use ids::{IdsCurve, IdsError};
pub use operator::{BoundaryCondition, Hamiltonian, OperatorError, Spectrum};
pub use wegner::{WegnerError, WegnerEval};
pub use probes::{LocalizationReport, ProbeError};

/// Largest `h²·E` for which a discretized spectrum is trusted as an
/// approximation of the continuum one.
pub const VALIDITY_FACTOR: f64 = 0.1;

/// Upper end of the trusted energy range for grid spacing `h`.
pub fn validity_cutoff(spacing: f64) -> f64 {
    VALIDITY_FACTOR / (spacing * spacing)
}
