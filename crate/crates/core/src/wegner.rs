//! The explicit Wegner constant
//!
//! ```text
//! W(E) = exp(tE + t²C_E/2) / (√(2πC(0)) b_E) · (2/ℓ_E + (2πt)^{-1/2})^d
//! ℓ_E = min(|E|^{-1/2}, ℓ),  b_E = inf_{|x|_∞ < ℓ_E/2} C(x)/C(0),  C_E = C(0)(2 - b_E²)
//! ```
//!
//! and Monte Carlo verification of `E|N_Λ(E₁) - N_Λ(E₂)| ≤ |Λ||E₁ - E₂| W(E)`
//! for `E₁, E₂ ≤ E`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{mean_and_error, Ensemble};
use crate::field::{box_min_ratio, CovarianceSpec, KernelSpec};
use crate::grid::Grid;
use crate::ids::{check_window, sample_counts, IdsError};
use crate::operator::BoundaryCondition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WegnerError {
    #[error("variational parameter t must be positive (got {0})")]
    NonPositiveT(f64),
    #[error("non-finite energy {0}")]
    NonFiniteEnergy(f64),
    #[error("cube volume {volume} is below ell^d = {required}")]
    VolumeTooSmall { volume: f64, required: f64 },
    #[error("triple ({e1}, {e2}, {e}) violates E1, E2 <= E")]
    InvalidTriple { e1: f64, e2: f64, e: f64 },
}

/// `(ℓ_E, b_E, C_E)` for one energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WegnerConstants {
    pub ell_e: f64,
    pub b_e: f64,
    pub c_e: f64,
}

/// `W(E)` at a given `t`, with `ln W` kept separately since `W` underflows
/// for strongly negative energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WegnerEval {
    pub energy: f64,
    pub t: f64,
    pub ell_e: f64,
    pub b_e: f64,
    pub c_e: f64,
    pub ln_w: f64,
    pub w: f64,
}

/// `ℓ_E = min(|E|^{-1/2}, ℓ)` (so `ℓ_0 = ℓ`), `b_E` by grid minimization,
/// `C_E = C(0)(2 - b_E²)`.
pub fn wegner_constants(cov: &CovarianceSpec, energy: f64) -> WegnerConstants {
    let ell_e = if energy == 0.0 { cov.window_ell } else { energy.abs().powf(-0.5).min(cov.window_ell) };
    let b_e = box_min_ratio(cov, ell_e / 2.0);
    WegnerConstants { ell_e, b_e, c_e: cov.c0 * (2.0 - b_e * b_e) }
}

fn ln_w(cov: &CovarianceSpec, energy: f64, t: f64, k: &WegnerConstants) -> f64 {
    let d = cov.dimension as f64;
    t * energy + 0.5 * t * t * k.c_e - 0.5 * (2.0 * std::f64::consts::PI * cov.c0).ln() - k.b_e.ln()
        + d * (2.0 / k.ell_e + (2.0 * std::f64::consts::PI * t).powf(-0.5)).ln()
}

pub fn wegner_constant(cov: &CovarianceSpec, energy: f64, t: f64) -> Result<WegnerEval, WegnerError> {
    if !energy.is_finite() {
        return Err(WegnerError::NonFiniteEnergy(energy));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(WegnerError::NonPositiveT(t));
    }
    let k = wegner_constants(cov, energy);
    Ok(eval_with(cov, energy, t, &k))
}

fn eval_with(cov: &CovarianceSpec, energy: f64, t: f64, k: &WegnerConstants) -> WegnerEval {
    let ln_w = ln_w(cov, energy, t, k);
    WegnerEval { energy, t, ell_e: k.ell_e, b_e: k.b_e, c_e: k.c_e, ln_w, w: ln_w.exp() }
}

/// `t = (2C_E)⁻¹ (-E + √(E² + 2C_E/π))`. For `E > 0` the equivalent
/// `1 / (π (E + √(E² + 2C_E/π)))` is used to avoid cancellation.
pub fn closed_form_t(cov: &CovarianceSpec, energy: f64) -> f64 {
    t_for(energy, wegner_constants(cov, energy).c_e)
}

fn t_for(energy: f64, c_e: f64) -> f64 {
    let root = (energy * energy + 2.0 * c_e / std::f64::consts::PI).sqrt();
    if energy > 0.0 {
        1.0 / (std::f64::consts::PI * (energy + root))
    } else {
        (root - energy) / (2.0 * c_e)
    }
}

pub fn wegner_at_closed_form(cov: &CovarianceSpec, energy: f64) -> Result<WegnerEval, WegnerError> {
    if !energy.is_finite() {
        return Err(WegnerError::NonFiniteEnergy(energy));
    }
    let k = wegner_constants(cov, energy);
    Ok(eval_with(cov, energy, t_for(energy, k.c_e), &k))
}

/// Closed-form `W` against the minimum of `W(E, ·)` over a log grid of `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TEnvelope {
    pub energy: f64,
    pub closed_form: WegnerEval,
    pub grid_min_t: f64,
    pub grid_min_ln_w: f64,
    /// `W(closed form) / min_grid W`.
    pub ratio: f64,
}

pub fn t_envelope(cov: &CovarianceSpec, energy: f64, points: usize, t_range: (f64, f64)) -> Result<TEnvelope, WegnerError> {
    let closed = wegner_at_closed_form(cov, energy)?;
    let k = wegner_constants(cov, energy);
    let (lo, hi) = (t_range.0.ln(), t_range.1.ln());
    let (mut best_t, mut best) = (f64::NAN, f64::INFINITY);
    for i in 0..points {
        let t = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp();
        let v = ln_w(cov, energy, t, &k);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    Ok(TEnvelope { energy, closed_form: closed, grid_min_t: best_t, grid_min_ln_w: best, ratio: (closed.ln_w - best).exp() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub sweep: Vec<WegnerEval>,
    pub low_energy: f64,
    /// `ln W(E)/E²` at `low_energy`.
    pub low_ratio: f64,
    /// `-1/(2C(0))`.
    pub low_target: f64,
    pub high_energy: f64,
    /// `W(E)/E^{d/2}` at `high_energy`.
    pub high_ratio: f64,
    /// `3^d e^{1/(2π)} / √(2πC(0))`.
    pub high_target: f64,
}

/// `W` at the closed-form `t` over a log-spaced sweep `±10^k` reaching
/// `low_energy < 0` and `high_energy > 0`, with the two asymptotic ratios.
pub fn wegner_asymptotics(cov: &CovarianceSpec, low_energy: f64, high_energy: f64, points_per_decade: usize) -> Result<AsymptoticsReport, WegnerError> {
    let d = cov.dimension as f64;
    let mut energies = Vec::new();
    let per = points_per_decade.max(1);
    let decades = |top: f64| -> Vec<f64> {
        let k = (top.log10() * per as f64).ceil() as usize;
        (0..=k).map(|i| 10f64.powf(i as f64 / per as f64).min(top)).collect()
    };
    energies.extend(decades(-low_energy).into_iter().rev().map(|e| -e));
    energies.push(0.0);
    energies.extend(decades(high_energy));
    energies.dedup();
    let sweep = energies.iter().map(|&e| wegner_at_closed_form(cov, e)).collect::<Result<Vec<_>, _>>()?;
    let low = wegner_at_closed_form(cov, low_energy)?;
    let high = wegner_at_closed_form(cov, high_energy)?;
    Ok(AsymptoticsReport {
        sweep,
        low_energy,
        low_ratio: low.ln_w / (low_energy * low_energy),
        low_target: -1.0 / (2.0 * cov.c0),
        high_energy,
        high_ratio: (high.ln_w - 0.5 * d * high_energy.ln()).exp(),
        high_target: 3f64.powf(d) * (1.0 / (2.0 * std::f64::consts::PI)).exp()
            / (2.0 * std::f64::consts::PI * cov.c0).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WegnerRecord {
    #[serde(rename = "E1")]
    pub e1: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub lhs: f64,
    pub lhs_err: f64,
    pub rhs: f64,
    pub t: f64,
    #[serde(rename = "ellE")]
    pub ell_e: f64,
    #[serde(rename = "bE")]
    pub b_e: f64,
    #[serde(rename = "CE")]
    pub c_e: f64,
    /// `(rhs - lhs)/rhs`, 1 when both sides vanish.
    pub margin: f64,
    /// `lhs + 3·lhs_err ≤ rhs`.
    pub pass: bool,
}

impl WegnerRecord {
    /// The mean exceeds the bound by more than three standard errors.
    pub fn is_violation(&self) -> bool {
        self.lhs - 3.0 * self.lhs_err > self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerReport {
    pub records: Vec<WegnerRecord>,
    pub grid: Grid,
    pub bc: BoundaryCondition,
    pub samples: usize,
    pub failed_samples: usize,
    pub master_seed: u64,
}

/// Monte Carlo check of the Wegner inequality on the discretized operator.
/// `t` defaults to the closed form for each `E`.
pub fn verify_wegner(
    kernel: &KernelSpec,
    cov: &CovarianceSpec,
    grid: &Grid,
    bc: BoundaryCondition,
    triples: &[(f64, f64, f64)],
    ensemble: &Ensemble,
    t_override: Option<f64>,
) -> Result<WegnerReport, IdsError> {
    let volume = grid.volume();
    let required = cov.window_ell.powi(grid.dimension() as i32);
    if volume < required {
        return Err(WegnerError::VolumeTooSmall { volume, required }.into());
    }
    for &(e1, e2, e) in triples {
        if !(e1 <= e && e2 <= e) {
            return Err(WegnerError::InvalidTriple { e1, e2, e }.into());
        }
    }
    if ensemble.samples < 2 {
        return Err(IdsError::TooFewSamples { needed: 2, got: ensemble.samples });
    }
    check_window(grid, triples.iter().flat_map(|&(a, b, _)| [a, b]))?;
    let mut energies: Vec<f64> = triples.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    energies.sort_by(f64::total_cmp);
    energies.dedup();
    let results = ensemble.map(|seed| sample_counts(kernel, grid, &[bc], &energies, seed));
    let ok: Vec<&Vec<usize>> = results.iter().filter_map(|r| r.as_ref().ok().map(|c| &c[0])).collect();
    if ok.is_empty() {
        return Err(IdsError::AllSamplesFailed(ensemble.samples));
    }
    let index = |e: f64| energies.iter().position(|&x| x == e).expect("energy collected above");
    let records = triples
        .iter()
        .map(|&(e1, e2, e)| {
            let (i1, i2) = (index(e1), index(e2));
            let diffs: Vec<f64> = ok.iter().map(|c| c[i1].abs_diff(c[i2]) as f64).collect();
            let (lhs, lhs_err) = mean_and_error(&diffs);
            let w = match t_override {
                Some(t) => wegner_constant(cov, e, t)?,
                None => wegner_at_closed_form(cov, e)?,
            };
            let rhs = volume * (e1 - e2).abs() * w.w;
            let margin = if rhs > 0.0 { (rhs - lhs) / rhs } else if lhs == 0.0 { 1.0 } else { f64::NEG_INFINITY };
            Ok(WegnerRecord {
                e1,
                e2,
                e,
                lhs,
                lhs_err,
                rhs,
                t: w.t,
                ell_e: w.ell_e,
                b_e: w.b_e,
                c_e: w.c_e,
                margin,
                pass: lhs + 3.0 * lhs_err <= rhs,
            })
        })
        .collect::<Result<Vec<_>, IdsError>>()?;
    Ok(WegnerReport {
        records,
        grid: grid.clone(),
        bc,
        samples: ok.len(),
        failed_samples: results.len() - ok.len(),
        master_seed: ensemble.master_seed,
    })
}
