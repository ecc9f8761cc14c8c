//! Eigenfunction localization diagnostics: inverse participation ratio and
//! exponential decay length.
//!
//! These are phenomenological evidence about low-energy eigenfunctions on
//! finite cubes. They neither prove nor refute statements about the
//! absolutely continuous spectrum of the infinite-volume operator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{mean_and_error, Ensemble};
use crate::field::{sample_field, FieldError, KernelSpec};
use crate::grid::Grid;
use crate::operator::{assemble, eigenpairs_below, BoundaryCondition, OperatorError, SolverOptions};
use crate::validity_cutoff;

/// Fits with an RMS log-residual above this are not treated as exponential decay.
pub const RESIDUAL_THRESHOLD: f64 = 0.5;
/// Shells whose mean weight is below this fraction of the peak weight are
/// dropped from decay fits (round-off floor of dense eigenvectors).
const WEIGHT_FLOOR: f64 = 1e-20;
pub const MIN_REPORT_SAMPLES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("vector is not normalized: sum |psi|^2 h^d = {0}")]
    NotNormalized(f64),
    #[error("vector length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("decay fit is degenerate: only {0} shell(s) carry weight")]
    DegenerateFit(usize),
    #[error("need at least {needed} samples (got {got})")]
    TooFewSamples { needed: usize, got: usize },
    #[error("window ({0}, {1}) is empty or reversed")]
    InvalidWindow(f64, f64),
    #[error("window top {energy} is outside the validity window (E <= {limit})")]
    WindowViolation { energy: f64, limit: f64 },
    #[error("all {0} samples failed")]
    AllSamplesFailed(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

fn weights(psi: &[f64], h: f64, d: usize) -> Result<Vec<f64>, ProbeError> {
    let cell = h.powi(d as i32);
    let w: Vec<f64> = psi.iter().map(|p| p * p * cell).collect();
    let norm: f64 = w.iter().sum();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(ProbeError::NotNormalized(norm));
    }
    Ok(w)
}

/// `Σ_i w_i²` with probability weights `w_i = |ψ_i|² h^d`; `ψ` must satisfy
/// `Σ|ψ_i|² h^d = 1`. Lies in `[1/#points, 1]`.
pub fn ipr(psi: &[f64], h: f64, d: usize) -> Result<f64, ProbeError> {
    Ok(weights(psi, h, d)?.iter().map(|w| w * w).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Amplitude decay length `λ` in `|ψ| ~ e^{-r/λ}`; `+∞` when no decay is seen.
    pub length: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub slope: f64,
    pub shells: usize,
    /// Residual below [`RESIDUAL_THRESHOLD`] and a decaying, finite length.
    pub exponential: bool,
}

/// Fit `ln⟨|ψ|²⟩_shell = c - 2r/λ` over shells of width `2h` in
/// `|x - x_peak|_∞`, the peak being the largest `|ψ|²`.
pub fn decay_length(psi: &[f64], grid: &Grid) -> Result<DecayFit, ProbeError> {
    if psi.len() != grid.len() {
        return Err(ProbeError::LengthMismatch { expected: grid.len(), got: psi.len() });
    }
    let d = grid.dimension();
    let h = grid.spacing();
    let w = weights(psi, h, d)?;
    let (peak, &peak_w) = w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty grid");
    let n = grid.points_per_side();
    let mut sums = vec![0.0; n / 2 + 1];
    let mut counts = vec![0usize; n / 2 + 1];
    for (i, &wi) in w.iter().enumerate() {
        let r = grid.displacement(peak, i).iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0);
        sums[r / 2] += wi;
        counts[r / 2] += 1;
    }
    let pts: Vec<(f64, f64)> = sums
        .iter()
        .zip(&counts)
        .enumerate()
        .filter(|(_, (_, &c))| c > 0)
        .map(|(s, (&sum, &c))| (s as f64 * 2.0 * h, sum / c as f64))
        .filter(|&(_, m)| m > WEIGHT_FLOOR * peak_w)
        .map(|(r, m)| (r, m.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(ProbeError::DegenerateFit(pts.len()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    let decaying = slope < -1e-9 / h;
    let length = if decaying { 2.0 / -slope } else { f64::INFINITY };
    Ok(DecayFit { length, residual, slope, shells: pts.len(), exponential: decaying && residual <= RESIDUAL_THRESHOLD })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub energy_window: (f64, f64),
    pub eigenpairs: usize,
    pub mean_ipr: Option<f64>,
    pub ipr_std_error: Option<f64>,
    /// Mean over fits flagged exponential.
    pub mean_decay_length: Option<f64>,
    pub mean_fit_residual: Option<f64>,
    pub exponential_fits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub sample: usize,
    pub low_window: bool,
    pub energy: f64,
    pub ipr: f64,
    pub decay_length: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub low: WindowStats,
    pub mid: WindowStats,
    pub samples: usize,
    pub failed_samples: usize,
    pub master_seed: u64,
    pub grid: Grid,
    pub bc: BoundaryCondition,
    #[serde(skip)]
    pub records: Vec<EigenRecord>,
}

impl LocalizationReport {
    pub fn records_csv(&self) -> String {
        let mut out = String::from("sample,window,energy,ipr,decay_length,residual\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.sample,
                if r.low_window { "low" } else { "mid" },
                r.energy,
                r.ipr,
                r.decay_length,
                r.residual
            ));
        }
        out
    }
}

fn window_stats(window: (f64, f64), records: &[&EigenRecord], fits: &[DecayFit]) -> WindowStats {
    if records.is_empty() {
        return WindowStats {
            energy_window: window,
            eigenpairs: 0,
            mean_ipr: None,
            ipr_std_error: None,
            mean_decay_length: None,
            mean_fit_residual: None,
            exponential_fits: 0,
        };
    }
    let iprs: Vec<f64> = records.iter().map(|r| r.ipr).collect();
    let (mean_ipr, err) = mean_and_error(&iprs);
    let good: Vec<f64> = fits.iter().filter(|f| f.exponential).map(|f| f.length).collect();
    let residuals: Vec<f64> = fits.iter().map(|f| f.residual).collect();
    WindowStats {
        energy_window: window,
        eigenpairs: records.len(),
        mean_ipr: Some(mean_ipr),
        ipr_std_error: Some(err),
        mean_decay_length: (!good.is_empty()).then(|| mean_and_error(&good).0),
        mean_fit_residual: (!residuals.is_empty()).then(|| mean_and_error(&residuals).0),
        exponential_fits: good.len(),
    }
}

fn check_window(w: (f64, f64), grid: &Grid) -> Result<(), ProbeError> {
    if !(w.0 <= w.1) || !w.0.is_finite() || !w.1.is_finite() {
        return Err(ProbeError::InvalidWindow(w.0, w.1));
    }
    let limit = validity_cutoff(grid.spacing());
    if w.1 > limit {
        return Err(ProbeError::WindowViolation { energy: w.1, limit });
    }
    Ok(())
}

/// IPR and decay-length statistics of all eigenpairs with eigenvalue in
/// `low_window` and `mid_window` (both closed), pooled over the ensemble.
pub fn localization_report(
    kernel: &KernelSpec,
    grid: &Grid,
    bc: BoundaryCondition,
    low_window: (f64, f64),
    mid_window: (f64, f64),
    ensemble: &Ensemble,
) -> Result<LocalizationReport, ProbeError> {
    if ensemble.samples < MIN_REPORT_SAMPLES {
        return Err(ProbeError::TooFewSamples { needed: MIN_REPORT_SAMPLES, got: ensemble.samples });
    }
    check_window(low_window, grid)?;
    check_window(mid_window, grid)?;
    let top = low_window.1.max(mid_window.1);
    let h = grid.spacing();
    let d = grid.dimension();
    let scale = h.powf(-(d as f64) / 2.0);
    let opts = SolverOptions { dense_limit: usize::MAX, ..Default::default() };
    let per_sample = ensemble.map(|seed| -> Result<Vec<(EigenRecord, DecayFit)>, ProbeError> {
        let field = sample_field(kernel, grid, seed)?;
        let ham = assemble(&field, bc)?;
        // Include eigenvalues equal to the window top.
        let pairs = eigenpairs_below(&ham.matrix, top + f64::EPSILON * top.abs().max(1.0), &opts)?;
        let mut out = Vec::new();
        for (k, &energy) in pairs.spectrum.eigenvalues.iter().enumerate() {
            let in_low = energy >= low_window.0 && energy <= low_window.1;
            let in_mid = energy >= mid_window.0 && energy <= mid_window.1;
            if !(in_low || in_mid) {
                continue;
            }
            let psi: Vec<f64> = pairs.vectors[k].iter().map(|v| v * scale).collect();
            let ipr = ipr(&psi, h, d)?;
            let fit = decay_length(&psi, grid)?;
            for low in [true, false].into_iter().filter(|&l| if l { in_low } else { in_mid }) {
                out.push((
                    EigenRecord { sample: seed.stream as usize, low_window: low, energy, ipr, decay_length: fit.length, residual: fit.residual },
                    fit,
                ));
            }
        }
        Ok(out)
    });
    let failed = per_sample.iter().filter(|r| r.is_err()).count();
    if failed == per_sample.len() {
        return Err(ProbeError::AllSamplesFailed(failed));
    }
    let all: Vec<(EigenRecord, DecayFit)> = per_sample.into_iter().filter_map(Result::ok).flatten().collect();
    let split = |low: bool| -> (Vec<&EigenRecord>, Vec<DecayFit>) {
        all.iter().filter(|(r, _)| r.low_window == low).map(|(r, f)| (r, *f)).unzip()
    };
    let (low_r, low_f) = split(true);
    let (mid_r, mid_f) = split(false);
    Ok(LocalizationReport {
        low: window_stats(low_window, &low_r, &low_f),
        mid: window_stats(mid_window, &mid_r, &mid_f),
        samples: ensemble.samples - failed,
        failed_samples: failed,
        master_seed: ensemble.master_seed,
        grid: grid.clone(),
        bc,
        records: all.iter().map(|(r, _)| *r).collect(),
    })
}

/// Closed energy interval `(lo, hi)`.
pub type EnergyWindow = (f64, f64);

/// Windows from the pooled eigenvalues below the validity cutoff: the lowest
/// decile `[min, q₀.₁]` and a band-centre slice `[q₀.₄₅, q₀.₅₅]`, each widened
/// by `1e-9·max|E|`.
pub fn decile_windows(
    kernel: &KernelSpec,
    grid: &Grid,
    bc: BoundaryCondition,
    ensemble: &Ensemble,
) -> Result<(EnergyWindow, EnergyWindow), ProbeError> {
    let cutoff = validity_cutoff(grid.spacing());
    let opts = SolverOptions::default();
    let per_sample = ensemble.map(|seed| -> Result<Vec<f64>, ProbeError> {
        let field = sample_field(kernel, grid, seed)?;
        let ham = assemble(&field, bc)?;
        Ok(ham.eigenvalues_below(cutoff, &opts)?.eigenvalues)
    });
    let mut pooled: Vec<f64> = per_sample.into_iter().filter_map(Result::ok).flatten().collect();
    if pooled.is_empty() {
        return Err(ProbeError::AllSamplesFailed(ensemble.samples));
    }
    pooled.sort_by(f64::total_cmp);
    let q = |p: f64| pooled[((pooled.len() - 1) as f64 * p).round() as usize];
    // Edges are eigenvalues themselves; widen them past solver round-off.
    let pad = 1e-9 * pooled.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let top = cutoff.min(q(0.55) + pad);
    Ok(((pooled[0] - pad, q(0.1) + pad), (q(0.45) - pad, top)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_gaussian_kernel;
    use proptest::prelude::*;

    fn normalize(mut v: Vec<f64>, h: f64, d: usize) -> Vec<f64> {
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>() * h.powi(d as i32);
        v.iter_mut().for_each(|x| *x /= norm.sqrt());
        v
    }

    #[test]
    fn ipr_extremes() {
        let h = 0.5;
        let mut spike = vec![0.0; 16];
        spike[3] = 1.0;
        assert!((ipr(&normalize(spike, h, 2), h, 2).unwrap() - 1.0).abs() < 1e-15);
        let uniform = normalize(vec![1.0; 16], h, 2);
        assert!((ipr(&uniform, h, 2).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!(matches!(ipr(&[1.0, 1.0], 1.0, 1), Err(ProbeError::NotNormalized(_))));
    }

    #[test]
    fn free_dirichlet_ground_state_ipr() {
        // Closed-form eigenvector sin(π(i+1)/(n+1)): IPR = 3/(2(n+1)) exactly.
        for n in [100usize, 400, 1600] {
            let h = 1.0 / n as f64;
            let v: Vec<f64> = (0..n).map(|i| (std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).sin()).collect();
            let value = ipr(&normalize(v, h, 1), h, 1).unwrap();
            let expected = 1.5 / (n + 1) as f64;
            assert!((value - expected).abs() < 1e-12 * expected, "n={n}: {value}");
        }
    }

    #[test]
    fn synthetic_exponential_decay_length() {
        let g = Grid::new(1, 64.0, 0.125).unwrap();
        let x0 = g.coordinate(g.origin_index());
        for lambda in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let v: Vec<f64> = (0..g.len()).map(|i| (-(g.coordinate(i) - x0).abs() / lambda).exp()).collect();
            let fit = decay_length(&normalize(v, 0.125, 1), &g).unwrap();
            assert!((fit.length - lambda).abs() <= 0.02 * lambda, "λ={lambda}: {}", fit.length);
            assert!(fit.exponential);
        }
    }

    #[test]
    fn uniform_vector_has_no_decay() {
        let g = Grid::new(1, 8.0, 0.25).unwrap();
        let fit = decay_length(&normalize(vec![1.0; g.len()], 0.25, 1), &g).unwrap();
        assert_eq!(fit.length, f64::INFINITY);
        assert!(!fit.exponential);
    }

    #[test]
    fn free_sine_is_flagged() {
        let g = Grid::new(1, 32.0, 0.125).unwrap();
        let n = g.len();
        let v: Vec<f64> = (0..n).map(|i| (std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).sin()).collect();
        let fit = decay_length(&normalize(v, 0.125, 1), &g).unwrap();
        assert!(fit.residual > RESIDUAL_THRESHOLD, "residual {}", fit.residual);
        assert!(!fit.exponential);
    }

    #[test]
    fn degenerate_fit() {
        let g = Grid::new(1, 2.0, 0.25).unwrap();
        let mut v = vec![0.0; g.len()];
        v[4] = 2.0;
        assert!(matches!(decay_length(&v, &g), Err(ProbeError::DegenerateFit(1))));
    }

    #[test]
    fn report_guards_and_empty_window() {
        let g = Grid::new(1, 8.0, 0.25).unwrap();
        let k = KernelSpec::zero(1);
        assert!(matches!(
            localization_report(&k, &g, BoundaryCondition::Dirichlet, (0.0, 1.0), (1.0, 2.0), &Ensemble::new(5, 0)),
            Err(ProbeError::TooFewSamples { .. })
        ));
        assert!(matches!(
            localization_report(&k, &g, BoundaryCondition::Dirichlet, (0.0, 1.0), (1.0, 2.0), &Ensemble::new(20, 0)),
            Err(ProbeError::WindowViolation { .. })
        ));
        let r = localization_report(&k, &g, BoundaryCondition::Dirichlet, (-5.0, -4.0), (0.0, 1.5), &Ensemble::new(20, 0)).unwrap();
        assert_eq!(r.low.eigenpairs, 0);
        assert_eq!(r.low.mean_ipr, None);
        assert!(r.mid.eigenpairs > 0);
    }

    #[test]
    fn free_operator_states_are_extended() {
        let g = Grid::new(1, 16.0, 0.125).unwrap();
        let n = g.len() as f64;
        let r = localization_report(&KernelSpec::zero(1), &g, BoundaryCondition::Dirichlet, (0.0, 0.5), (2.0, 4.0), &Ensemble::new(20, 0)).unwrap();
        for w in [&r.low, &r.mid] {
            let m = w.mean_ipr.unwrap();
            assert!(m > 1.0 / n && m < 2.0 / n, "mean IPR {m} vs 1/n = {}", 1.0 / n);
        }
    }

    #[test]
    fn decile_windows_cover_their_edge_states() {
        let k = make_gaussian_kernel(2.0, 1.0, 1).unwrap();
        let g = Grid::new(1, 16.0, 0.125).unwrap();
        let ens = Ensemble::new(20, 4);
        let (low, mid) = decile_windows(&k, &g, BoundaryCondition::Dirichlet, &ens).unwrap();
        assert!(low.1 < mid.0 && mid.1 <= validity_cutoff(0.125));
        let r = localization_report(&k, &g, BoundaryCondition::Dirichlet, low, mid, &ens).unwrap();
        let lowest = r.records.iter().map(|e| e.energy).fold(f64::INFINITY, f64::min);
        assert!(lowest >= low.0 && lowest - low.0 < 1e-6, "{lowest} vs {}", low.0);
        assert!(r.low.mean_ipr.unwrap() > r.mid.mean_ipr.unwrap());
    }

    proptest! {
        #[test]
        fn ipr_bounds(v in proptest::collection::vec(-1.0f64..1.0, 27)) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
            let psi = normalize(v, 0.5, 3);
            let value = ipr(&psi, 0.5, 3).unwrap();
            prop_assert!((1.0 / 27.0 - 1e-15..=1.0 + 1e-15).contains(&value));
        }
    }
}
