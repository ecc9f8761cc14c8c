//! Integrated density of states: finite-volume counting, Monte Carlo
//! ensemble averages, the localized-trace estimator, and asymptotic checks.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::ensemble::{mean_and_error, Ensemble, SampleSeed};
use crate::field::{sample_field, CovarianceSpec, FieldError, KernelSpec};
use crate::grid::Grid;
use crate::operator::{assemble, count_below_many, eigenpairs_below, BoundaryCondition, OperatorError, SolverOptions, Spectrum};
use crate::wegner::{self, WegnerError};
use crate::validity_cutoff;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdsError {
    #[error("energy {energy} exceeds the spectrum cutoff {cutoff}")]
    CutoffExceeded { energy: f64, cutoff: f64 },
    #[error("spectrum is not certified complete below its cutoff")]
    IncompleteSpectrum,
    #[error("need at least {needed} samples (got {got})")]
    TooFewSamples { needed: usize, got: usize },
    #[error("energy list must be non-empty and strictly ascending")]
    EnergiesNotAscending,
    #[error("energy {energy} is outside the validity window h²E <= 0.1 (E <= {limit} for h = {spacing})")]
    WindowViolation { energy: f64, spacing: f64, limit: f64 },
    #[error("window buffer {available} is below the required {needed}")]
    BufferViolation { needed: f64, available: f64 },
    #[error("window does not fit inside the grid")]
    WindowOutside,
    #[error("only {found} tail energies with positive IDS (need {needed})")]
    InsufficientTailData { found: usize, needed: usize },
    #[error("energy grid is not uniform")]
    NonUniformEnergyGrid,
    #[error("energy {0} is not on the curve")]
    EnergyNotOnCurve(f64),
    #[error("energy {0} must be positive")]
    NonPositiveEnergy(f64),
    #[error("all {0} samples failed")]
    AllSamplesFailed(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Wegner(#[from] WegnerError),
}

/// `N_Λ(E)`: eigenvalues strictly below `E`, with multiplicity.
pub fn finite_ids(spectrum: &Spectrum, energy: f64) -> Result<usize, IdsError> {
    if !spectrum.complete_below_cutoff {
        return Err(IdsError::IncompleteSpectrum);
    }
    if energy > spectrum.cutoff {
        return Err(IdsError::CutoffExceeded { energy, cutoff: spectrum.cutoff });
    }
    Ok(spectrum.count_below(energy))
}

/// Monte Carlo estimate of `E ↦ E[N_{Λ,X}(E)]/|Λ|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsCurve {
    pub energies: Vec<f64>,
    pub per_volume_mean: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Samples that entered the averages.
    pub samples: usize,
    pub failed_samples: usize,
    pub bc: BoundaryCondition,
    pub grid: Grid,
    pub master_seed: u64,
}

impl IdsCurve {
    pub fn is_complete(&self) -> bool {
        self.failed_samples == 0
    }

    pub fn value_at(&self, energy: f64) -> Option<(f64, f64)> {
        self.energies.iter().position(|&e| e == energy).map(|i| (self.per_volume_mean[i], self.std_error[i]))
    }

    /// CSV with columns `energy,mean,std_error,samples,bc,side_length,spacing,seed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy,mean,std_error,samples,bc,side_length,spacing,seed\n");
        for i in 0..self.energies.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.energies[i],
                self.per_volume_mean[i],
                self.std_error[i],
                self.samples,
                self.bc,
                self.grid.side_length(),
                self.grid.spacing(),
                self.master_seed
            ));
        }
        out
    }

    fn from_counts(grid: &Grid, bc: BoundaryCondition, energies: &[f64], master_seed: u64, counts: &[Option<&Vec<usize>>]) -> Result<Self, IdsError> {
        let ok: Vec<&Vec<usize>> = counts.iter().flatten().copied().collect();
        if ok.is_empty() {
            return Err(IdsError::AllSamplesFailed(counts.len()));
        }
        let volume = grid.volume();
        let mut per_volume_mean = Vec::with_capacity(energies.len());
        let mut std_error = Vec::with_capacity(energies.len());
        for e in 0..energies.len() {
            let values: Vec<f64> = ok.iter().map(|c| c[e] as f64 / volume).collect();
            let (m, s) = mean_and_error(&values);
            per_volume_mean.push(m);
            std_error.push(s);
        }
        Ok(Self {
            energies: energies.to_vec(),
            per_volume_mean,
            std_error,
            samples: ok.len(),
            failed_samples: counts.len() - ok.len(),
            bc,
            grid: grid.clone(),
            master_seed,
        })
    }
}

pub(crate) fn check_energies(grid: &Grid, energies: &[f64]) -> Result<(), IdsError> {
    if energies.is_empty() || energies.windows(2).any(|w| !(w[0] < w[1])) || energies.iter().any(|e| !e.is_finite()) {
        return Err(IdsError::EnergiesNotAscending);
    }
    check_window(grid, energies.iter().copied())
}

pub(crate) fn check_window(grid: &Grid, energies: impl IntoIterator<Item = f64>) -> Result<(), IdsError> {
    let limit = validity_cutoff(grid.spacing());
    for energy in energies {
        if energy > limit {
            return Err(IdsError::WindowViolation { energy, spacing: grid.spacing(), limit });
        }
    }
    Ok(())
}

/// Counts `N_{Λ,X}(E)` of one realization for each boundary condition in `bcs`
/// (outer index) and energy (inner index). All conditions share the field.
pub fn sample_counts(
    kernel: &KernelSpec,
    grid: &Grid,
    bcs: &[BoundaryCondition],
    energies: &[f64],
    seed: SampleSeed,
) -> Result<Vec<Vec<usize>>, IdsError> {
    let field = sample_field(kernel, grid, seed)?;
    bcs.iter()
        .map(|&bc| {
            let h = assemble(&field, bc)?;
            Ok(count_below_many(&h.matrix, energies)?)
        })
        .collect()
}

/// Per-sample counts indexed `[bc][energy]`.
type SampleCounts = Result<Vec<Vec<usize>>, IdsError>;

fn ensemble_counts(
    kernel: &KernelSpec,
    grid: &Grid,
    bcs: &[BoundaryCondition],
    energies: &[f64],
    ensemble: &Ensemble,
) -> Result<Vec<SampleCounts>, IdsError> {
    if ensemble.samples < 2 {
        return Err(IdsError::TooFewSamples { needed: 2, got: ensemble.samples });
    }
    check_energies(grid, energies)?;
    if kernel.dimension != grid.dimension() {
        return Err(FieldError::DimensionMismatch { kernel: kernel.dimension, grid: grid.dimension() }.into());
    }
    Ok(ensemble.map(|seed| sample_counts(kernel, grid, bcs, energies, seed)))
}

/// Finite-volume Monte Carlo approximant of the IDS. Failed samples are
/// excluded from the averages and counted in `failed_samples`.
pub fn mc_ids(
    kernel: &KernelSpec,
    grid: &Grid,
    bc: BoundaryCondition,
    energies: &[f64],
    ensemble: &Ensemble,
) -> Result<IdsCurve, IdsError> {
    let results = ensemble_counts(kernel, grid, &[bc], energies, ensemble)?;
    let counts: Vec<Option<&Vec<usize>>> = results.iter().map(|r| r.as_ref().ok().map(|c| &c[0])).collect();
    IdsCurve::from_counts(grid, bc, energies, ensemble.master_seed, &counts)
}

/// Dirichlet and Neumann curves from the same realizations, with the
/// sample-wise check `N_D(E) ≤ N_N(E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    pub dirichlet: IdsCurve,
    pub neumann: IdsCurve,
    /// `max_E (N_N - N_D)/|Λ|` of the mean curves: the finite-volume convergence diagnostic.
    pub max_gap: f64,
    /// `(sample index, energy)` pairs where the counting inequality failed.
    pub violations: Vec<(usize, f64)>,
    pub paired_samples: usize,
}

pub fn bracketed_ids(kernel: &KernelSpec, grid: &Grid, energies: &[f64], ensemble: &Ensemble) -> Result<BracketReport, IdsError> {
    let bcs = [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann];
    let results = ensemble_counts(kernel, grid, &bcs, energies, ensemble)?;
    let mut violations = Vec::new();
    for (k, r) in results.iter().enumerate() {
        if let Ok(c) = r {
            for (e, &energy) in energies.iter().enumerate() {
                if c[0][e] > c[1][e] {
                    violations.push((k, energy));
                }
            }
        }
    }
    let pick = |b: usize| -> Vec<Option<&Vec<usize>>> { results.iter().map(|r| r.as_ref().ok().map(|c| &c[b])).collect() };
    let dirichlet = IdsCurve::from_counts(grid, bcs[0], energies, ensemble.master_seed, &pick(0))?;
    let neumann = IdsCurve::from_counts(grid, bcs[1], energies, ensemble.master_seed, &pick(1))?;
    let max_gap = dirichlet
        .per_volume_mean
        .iter()
        .zip(&neumann.per_volume_mean)
        .map(|(d, n)| n - d)
        .fold(0.0f64, f64::max);
    Ok(BracketReport { paired_samples: dirichlet.samples, dirichlet, neumann, max_gap, violations })
}

/// Sub-cube `lo[axis] .. lo[axis] + side` of grid indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<usize>,
    pub side: usize,
}

impl Window {
    pub fn full(grid: &Grid) -> Self {
        Self { lo: vec![0; grid.dimension()], side: grid.points_per_side() }
    }

    /// Centred window of (approximately) the given physical side length.
    pub fn centered(grid: &Grid, side_length: f64) -> Result<Self, IdsError> {
        let n = grid.points_per_side();
        let side = (side_length / grid.spacing()).round() as usize;
        if side == 0 || side > n {
            return Err(IdsError::WindowOutside);
        }
        Ok(Self { lo: vec![(n - side) / 2; grid.dimension()], side })
    }

    pub fn is_full(&self, grid: &Grid) -> bool {
        self.side == grid.points_per_side() && self.lo.iter().all(|&l| l == 0)
    }

    pub fn volume(&self, grid: &Grid) -> f64 {
        (self.side as f64 * grid.spacing()).powi(grid.dimension() as i32)
    }

    fn contains(&self, idx: &[usize]) -> bool {
        idx.iter().zip(&self.lo).all(|(&i, &l)| i >= l && i < l + self.side)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub energy: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// `|W|⁻¹ E[Tr(χ_W Θ(E - H_Λ) χ_W)]` for a window `W` deep inside a large
/// cube: per sample, the sum over eigenpairs below `E` of the eigenvector mass
/// inside the window. A window covering the whole grid reduces to
/// `N_Λ(E)/|Λ|` (each eigenvector then contributes exactly 1).
pub fn trace_ids(
    kernel: &KernelSpec,
    big_grid: &Grid,
    window: &Window,
    bc: BoundaryCondition,
    energies: &[f64],
    ensemble: &Ensemble,
) -> Result<Vec<TraceEstimate>, IdsError> {
    if ensemble.samples < 2 {
        return Err(IdsError::TooFewSamples { needed: 2, got: ensemble.samples });
    }
    check_energies(big_grid, energies)?;
    let d = big_grid.dimension();
    let n = big_grid.points_per_side();
    if window.lo.len() != d || window.side == 0 || window.lo.iter().any(|&l| l + window.side > n) {
        return Err(IdsError::WindowOutside);
    }
    let full = window.is_full(big_grid);
    if !full {
        let h = big_grid.spacing();
        let needed = (2.0 * kernel.truncation_radius).max(4.0 * kernel.gaussian_length().unwrap_or(0.0));
        let available = window
            .lo
            .iter()
            .map(|&l| (l.min(n - l - window.side)) as f64 * h)
            .fold(f64::INFINITY, f64::min);
        if available < needed - 1e-9 * needed {
            return Err(IdsError::BufferViolation { needed, available });
        }
    }
    let inside: Vec<bool> = (0..big_grid.len()).map(|i| window.contains(&big_grid.unravel(i)[..d])).collect();
    let e_top = *energies.last().expect("non-empty");
    let opts = SolverOptions { dense_limit: usize::MAX, ..Default::default() };
    let per_sample = ensemble.map(|seed| -> Result<Vec<f64>, IdsError> {
        let field = sample_field(kernel, big_grid, seed)?;
        let h = assemble(&field, bc)?;
        let pairs = eigenpairs_below(&h.matrix, e_top, &opts)?;
        let masses: Vec<f64> = if full {
            vec![1.0; pairs.vectors.len()]
        } else {
            pairs
                .vectors
                .iter()
                .map(|v| v.iter().zip(&inside).filter(|(_, &w)| w).map(|(x, _)| x * x).sum())
                .collect()
        };
        Ok(energies
            .iter()
            .map(|&e| {
                let count = pairs.spectrum.count_below(e);
                crate::ensemble::compensated_sum(masses[..count].iter().copied())
            })
            .collect())
    });
    let ok: Vec<Vec<f64>> = per_sample.into_iter().filter_map(Result::ok).collect();
    if ok.is_empty() {
        return Err(IdsError::AllSamplesFailed(ensemble.samples));
    }
    let volume = window.volume(big_grid);
    Ok(energies
        .iter()
        .enumerate()
        .map(|(e, &energy)| {
            let values: Vec<f64> = ok.iter().map(|s| s[e] / volume).collect();
            let (estimate, std_error) = mean_and_error(&values);
            TraceEstimate { energy, estimate, std_error }
        })
        .collect())
}

/// High-energy constant `(2π)^{-d/2} / Γ(1 + d/2)` of `N(E) ~ c E^{d/2}`.
pub fn weyl_target(d: usize) -> f64 {
    let df = d as f64;
    (2.0 * std::f64::consts::PI).powf(-df / 2.0) / gamma(1.0 + df / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylPoint {
    pub energy: f64,
    pub ratio: f64,
    pub target: f64,
}

/// `N(E)/E^{d/2}` against the Weyl constant at each requested curve energy.
pub fn weyl_check(curve: &IdsCurve, energies: &[f64]) -> Result<Vec<WeylPoint>, IdsError> {
    let d = curve.grid.dimension();
    let target = weyl_target(d);
    check_window(&curve.grid, energies.iter().copied())?;
    energies
        .iter()
        .map(|&energy| {
            if !(energy > 0.0) {
                return Err(IdsError::NonPositiveEnergy(energy));
            }
            let (mean, _) = curve.value_at(energy).ok_or(IdsError::EnergyNotOnCurve(energy))?;
            Ok(WeylPoint { energy, ratio: mean / energy.powf(d as f64 / 2.0), target })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub fitted_slope: f64,
    pub target_slope: f64,
    pub energies_used: Vec<f64>,
}

pub const MIN_TAIL_POINTS: usize = 4;

/// Least-squares slope of `ln N(E)` against `E²` over curve energies at or below
/// `-2√C(0)` with positive IDS, against the Gaussian-tail value `-1/(2C(0))`.
pub fn tail_check(curve: &IdsCurve, c0: f64) -> Result<TailFit, IdsError> {
    let threshold = -2.0 * c0.sqrt();
    let pts: Vec<(f64, f64)> = curve
        .energies
        .iter()
        .zip(&curve.per_volume_mean)
        .filter(|(e, m)| **e <= threshold && **m > 0.0)
        .map(|(e, m)| (e * e, m.ln()))
        .collect();
    if pts.len() < MIN_TAIL_POINTS {
        return Err(IdsError::InsufficientTailData { found: pts.len(), needed: MIN_TAIL_POINTS });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(TailFit {
        fitted_slope: sxy / sxx,
        target_slope: -1.0 / (2.0 * c0),
        energies_used: pts.iter().map(|p| -p.0.sqrt()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DosPoint {
    pub energy: f64,
    pub derivative: f64,
    pub derivative_err: f64,
    pub wegner: f64,
    pub pass: bool,
}

/// Central-difference density of states of an IDS curve against `W(E)` at the
/// closed-form `t`. Interior energies only; pass when
/// `dN/dE ≤ W(E) + 3·error`.
pub fn density_bound_check(curve: &IdsCurve, cov: &CovarianceSpec) -> Result<Vec<DosPoint>, IdsError> {
    let e = &curve.energies;
    if e.len() < 3 {
        return Err(IdsError::NonUniformEnergyGrid);
    }
    let step = e[1] - e[0];
    if e.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0)) {
        return Err(IdsError::NonUniformEnergyGrid);
    }
    (1..e.len() - 1)
        .map(|i| {
            let derivative = (curve.per_volume_mean[i + 1] - curve.per_volume_mean[i - 1]) / (2.0 * step);
            let derivative_err = curve.std_error[i + 1].hypot(curve.std_error[i - 1]) / (2.0 * step);
            let w = wegner::wegner_at_closed_form(cov, e[i])?.w;
            Ok(DosPoint { energy: e[i], derivative, derivative_err, wegner: w, pass: derivative <= w + 3.0 * derivative_err })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_gaussian_kernel;
    use crate::operator::free_spectrum;

    fn spectrum() -> Spectrum {
        Spectrum { eigenvalues: vec![-1.0, 0.5, 0.5, 2.0], cutoff: 3.0, complete_below_cutoff: true }
    }

    #[test]
    fn finite_ids_counting() {
        let s = spectrum();
        assert_eq!(finite_ids(&s, 0.5).unwrap(), 1);
        assert_eq!(finite_ids(&s, 3.0).unwrap(), 4);
        assert_eq!(finite_ids(&s, -5.0).unwrap(), 0);
        assert!(matches!(finite_ids(&s, 3.5), Err(IdsError::CutoffExceeded { .. })));
        let partial = Spectrum { complete_below_cutoff: false, ..s };
        assert_eq!(finite_ids(&partial, 0.0), Err(IdsError::IncompleteSpectrum));
    }

    #[test]
    fn weyl_targets() {
        assert!((weyl_target(1) - std::f64::consts::SQRT_2 / std::f64::consts::PI).abs() < 1e-15);
        assert!((weyl_target(2) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((weyl_target(1) - 0.4502).abs() < 1e-4);
    }

    #[test]
    fn zero_kernel_curve_is_free_counting() {
        let g = Grid::new(1, 8.0, 0.125).unwrap();
        let energies = [0.5, 1.0, 2.0, 4.0];
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let curve = mc_ids(&KernelSpec::zero(1), &g, bc, &energies, &Ensemble::new(3, 1)).unwrap();
            let free = free_spectrum(&g, bc, 10.0);
            for (i, &e) in energies.iter().enumerate() {
                assert_eq!(curve.per_volume_mean[i], free.count_below(e) as f64 / 8.0);
                assert_eq!(curve.std_error[i], 0.0);
            }
        }
    }

    #[test]
    fn window_and_sample_guards() {
        let g = Grid::new(1, 8.0, 0.125).unwrap();
        let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
        assert!(matches!(mc_ids(&k, &g, BoundaryCondition::Dirichlet, &[7.0], &Ensemble::new(4, 0)), Err(IdsError::WindowViolation { .. })));
        assert!(matches!(mc_ids(&k, &g, BoundaryCondition::Dirichlet, &[1.0, 0.0], &Ensemble::new(4, 0)), Err(IdsError::EnergiesNotAscending)));
        assert!(matches!(mc_ids(&k, &g, BoundaryCondition::Dirichlet, &[1.0], &Ensemble::new(1, 0)), Err(IdsError::TooFewSamples { .. })));
        let w = Window::centered(&g, 4.0).unwrap();
        assert!(matches!(
            trace_ids(&k, &g, &w, BoundaryCondition::Dirichlet, &[0.0], &Ensemble::new(2, 0)),
            Err(IdsError::BufferViolation { .. })
        ));
    }

    #[test]
    fn tail_fit_recovers_synthetic_slope() {
        let g = Grid::new(1, 8.0, 0.125).unwrap();
        let energies: Vec<f64> = (0..6).map(|i| -4.0 + 0.4 * i as f64).collect();
        let curve = IdsCurve {
            per_volume_mean: energies.iter().map(|e| 0.3 * (-0.7 * e * e).exp()).collect(),
            std_error: vec![0.0; 6],
            energies,
            samples: 10,
            failed_samples: 0,
            bc: BoundaryCondition::Dirichlet,
            grid: g,
            master_seed: 0,
        };
        let fit = tail_check(&curve, 1.0).unwrap();
        assert!((fit.fitted_slope + 0.7).abs() < 1e-12);
        assert_eq!(fit.target_slope, -0.5);
        let mut deeper = curve.clone();
        deeper.energies.iter_mut().for_each(|e| *e -= 4.0);
        assert_eq!(tail_check(&deeper, 4.0).unwrap().target_slope, -0.125);
        let mut sparse = curve.clone();
        sparse.per_volume_mean[..3].iter_mut().for_each(|v| *v = 0.0);
        assert!(matches!(tail_check(&sparse, 1.0), Err(IdsError::InsufficientTailData { .. })));
    }

    #[test]
    fn density_check_rejects_uneven_grid() {
        let g = Grid::new(1, 8.0, 0.125).unwrap();
        let curve = IdsCurve {
            energies: vec![0.0, 0.1, 0.3],
            per_volume_mean: vec![0.0; 3],
            std_error: vec![0.0; 3],
            samples: 2,
            failed_samples: 0,
            bc: BoundaryCondition::Dirichlet,
            grid: g,
            master_seed: 0,
        };
        let cov = CovarianceSpec::gaussian(1.0, 1.0, 1, None).unwrap();
        assert_eq!(density_bound_check(&curve, &cov), Err(IdsError::NonUniformEnergyGrid));
    }
}
