use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::FieldError;

/// Default bound on `∫_{|x|_∞>R} u² / ∫ u²`.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-6;

/// Truncation radius of the Gaussian kernel in units of its length.
const GAUSSIAN_TRUNCATION: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelShape {
    /// `u(x) = A·exp(-|x|²/ξ²)`.
    Gaussian { amplitude: f64, length: f64 },
    /// Samples on the centred grid `{-m..=m}^d · spacing`, row-major,
    /// multilinearly interpolated and zero outside.
    Tabulated { values: Vec<f64>, half_points: usize, spacing: f64 },
}

/// The convolution kernel `u` together with its regularity constants:
/// Hölder `|u(x+y) - u(x)| ≤ a|y|_∞^α` and decay `|u(x)| ≤ b/|x|_∞^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub dimension: usize,
    pub shape: KernelShape,
    pub truncation_radius: f64,
    pub holder_a: f64,
    pub holder_alpha: f64,
    pub decay_b: f64,
    pub decay_beta: f64,
}

/// Non-fatal findings of [`KernelSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum KernelWarning {
    /// The decay exponent is at or below `25d/2 - 1`, the threshold the
    /// localization proof needs. Irrelevant for the numerics.
    DecayExponentBelowThreshold { beta: f64, threshold: f64 },
}

fn check_dimension(d: usize) -> Result<(), FieldError> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(FieldError::InvalidDimension(d))
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), FieldError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(FieldError::NonPositive { name, value })
    }
}

/// Kernel whose self-convolution is `σ² exp(-|x|²/(2ξ²))`.
///
/// `∫ A² e^{-|x+y|²/ξ²} e^{-|y|²/ξ²} dy = A² (πξ²/2)^{d/2} e^{-|x|²/(2ξ²)}`,
/// hence `A = σ (πξ²/2)^{-d/4}`.
pub fn make_gaussian_kernel(sigma: f64, xi: f64, d: usize) -> Result<KernelSpec, FieldError> {
    check_dimension(d)?;
    positive("sigma", sigma)?;
    positive("xi", xi)?;
    let amplitude = sigma * (std::f64::consts::PI * xi * xi / 2.0).powf(-(d as f64) / 4.0);
    Ok(KernelSpec::gaussian(amplitude, xi, d))
}

impl KernelSpec {
    /// Gaussian kernel with an explicit amplitude (0 allowed) and analytic
    /// regularity constants: Lipschitz (`α = 1`) and `β = 25d/2`.
    pub fn gaussian(amplitude: f64, length: f64, d: usize) -> Self {
        let df = d as f64;
        // max_r |d/dr e^{-r²/ξ²}| = √2 e^{-1/2} / ξ, summed over axes for |·|_∞ increments.
        let holder_a = df * amplitude * std::f64::consts::SQRT_2 * (-0.5f64).exp() / length;
        let decay_beta = 12.5 * df;
        // sup_r r^β e^{-r²/ξ²} at r² = βξ²/2.
        let decay_b = amplitude * (length * length * decay_beta / (2.0 * std::f64::consts::E)).powf(decay_beta / 2.0);
        Self {
            dimension: d,
            shape: KernelShape::Gaussian { amplitude, length },
            truncation_radius: GAUSSIAN_TRUNCATION * length,
            holder_a,
            holder_alpha: 1.0,
            decay_b,
            decay_beta,
        }
    }

    /// The zero kernel, producing `V ≡ 0`.
    pub fn zero(d: usize) -> Self {
        Self::gaussian(0.0, 1.0, d)
    }

    pub fn tabulated(
        d: usize,
        values: Vec<f64>,
        spacing: f64,
        holder: (f64, f64),
        decay: (f64, f64),
    ) -> Result<Self, FieldError> {
        check_dimension(d)?;
        positive("table spacing", spacing)?;
        let side = (values.len() as f64).powf(1.0 / d as f64).round() as usize;
        if side.is_multiple_of(2) || side.pow(d as u32) != values.len() {
            return Err(FieldError::TableShape(values.len()));
        }
        let half_points = side / 2;
        Ok(Self {
            dimension: d,
            shape: KernelShape::Tabulated { values, half_points, spacing },
            truncation_radius: half_points as f64 * spacing,
            holder_a: holder.0,
            holder_alpha: holder.1,
            decay_b: decay.0,
            decay_beta: decay.1,
        })
    }

    /// Tabulated kernel whose regularity constants are read off the table:
    /// Lipschitz constant from the largest discrete jump and the smallest
    /// `b` valid for `β = 25d/2`.
    pub fn tabulated_with_estimated_constants(d: usize, values: Vec<f64>, spacing: f64) -> Result<Self, FieldError> {
        let mut spec = Self::tabulated(d, values, spacing, (0.0, 1.0), (0.0, 12.5 * d as f64))?;
        let (jump, _) = spec.max_table_jump();
        spec.holder_a = jump / spacing;
        let beta = spec.decay_beta;
        let mut b = 0.0f64;
        spec.for_each_table_point(|r, v| {
            if r >= 1.0 {
                b = b.max(v.abs() * r.powf(beta));
            }
        });
        spec.decay_b = b;
        Ok(spec)
    }

    /// Short human-readable identifier recorded with every sample.
    pub fn label(&self) -> String {
        match &self.shape {
            KernelShape::Gaussian { amplitude, length } => format!(
                "gaussian(d={},amplitude={},xi={},R={})",
                self.dimension, amplitude, length, self.truncation_radius
            ),
            KernelShape::Tabulated { values, half_points, spacing } => format!(
                "tabulated(d={},m={},spacing={},R={},sum={})",
                self.dimension,
                half_points,
                spacing,
                self.truncation_radius,
                values.iter().sum::<f64>()
            ),
        }
    }

    /// Length scale ξ of a Gaussian kernel.
    pub fn gaussian_length(&self) -> Option<f64> {
        match self.shape {
            KernelShape::Gaussian { length, .. } => Some(length),
            KernelShape::Tabulated { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.shape {
            KernelShape::Gaussian { amplitude, .. } => *amplitude == 0.0,
            KernelShape::Tabulated { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    /// `u(x)`, zero beyond the truncation radius in the sup norm.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let x = &x[..self.dimension];
        if sup_norm(x) > self.truncation_radius {
            return 0.0;
        }
        match &self.shape {
            KernelShape::Gaussian { amplitude, length } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amplitude * (-r2 / (length * length)).exp()
            }
            KernelShape::Tabulated { values, half_points, spacing } => {
                interpolate(values, *half_points, *spacing, x)
            }
        }
    }

    /// Check non-negativity, Hölder continuity, decay and truncation mass.
    pub fn validate(&self, truncation_tolerance: f64) -> Result<Vec<KernelWarning>, FieldError> {
        check_dimension(self.dimension)?;
        positive("truncation radius", self.truncation_radius)?;
        let d = self.dimension as f64;
        match &self.shape {
            KernelShape::Gaussian { amplitude, length } => {
                positive("kernel length", *length)?;
                if *amplitude < 0.0 {
                    return Err(FieldError::NegativeKernel { value: *amplitude, at: 0.0 });
                }
                if *amplitude > 0.0 {
                    // Per axis: ∫_{|x|>R} e^{-2x²/ξ²} / ∫ e^{-2x²/ξ²} = erfc(√2 R/ξ).
                    let inside = 1.0 - erfc(std::f64::consts::SQRT_2 * self.truncation_radius / length);
                    let ratio = 1.0 - inside.powi(self.dimension as i32);
                    if ratio >= truncation_tolerance {
                        return Err(FieldError::TruncationMass { ratio, tolerance: truncation_tolerance });
                    }
                }
            }
            KernelShape::Tabulated { spacing, .. } => {
                let mut err = None;
                let (mut total, mut outside) = (0.0, 0.0);
                self.for_each_table_point(|r, v| {
                    if v < 0.0 && err.is_none() {
                        err = Some(FieldError::NegativeKernel { value: v, at: r });
                    }
                    if r >= 1.0 && err.is_none() {
                        let bound = self.decay_b / r.powf(self.decay_beta);
                        if v.abs() > bound * (1.0 + 1e-12) {
                            err = Some(FieldError::DecayViolation { value: v, bound, at: r });
                        }
                    }
                    total += v * v;
                    if r > self.truncation_radius {
                        outside += v * v;
                    }
                });
                if let Some(e) = err {
                    return Err(e);
                }
                let (jump, _) = self.max_table_jump();
                let bound = self.holder_a * spacing.powf(self.holder_alpha);
                if jump > bound * (1.0 + 1e-12) {
                    return Err(FieldError::HolderViolation { jump, bound });
                }
                if total > 0.0 && outside / total >= truncation_tolerance {
                    return Err(FieldError::TruncationMass { ratio: outside / total, tolerance: truncation_tolerance });
                }
            }
        }
        let mut warnings = Vec::new();
        let threshold = 12.5 * d - 1.0;
        if self.decay_beta <= threshold {
            warnings.push(KernelWarning::DecayExponentBelowThreshold { beta: self.decay_beta, threshold });
        }
        Ok(warnings)
    }

    /// Visit every table entry with its sup-norm radius. No-op for analytic shapes.
    fn for_each_table_point(&self, mut f: impl FnMut(f64, f64)) {
        if let KernelShape::Tabulated { values, half_points, spacing } = &self.shape {
            let side = 2 * half_points + 1;
            for (flat, &v) in values.iter().enumerate() {
                let mut rest = flat;
                let mut r = 0usize;
                for _ in 0..self.dimension {
                    let i = rest % side;
                    rest /= side;
                    r = r.max(i.abs_diff(*half_points));
                }
                f(r as f64 * spacing, v);
            }
        }
    }

    /// Largest difference between axis-neighbouring table entries.
    fn max_table_jump(&self) -> (f64, usize) {
        let KernelShape::Tabulated { values, half_points, .. } = &self.shape else {
            return (0.0, 0);
        };
        let side = 2 * half_points + 1;
        let mut best = (0.0f64, 0usize);
        let mut stride = 1;
        for _ in 0..self.dimension {
            for flat in 0..values.len() {
                if (flat / stride) % side + 1 < side {
                    let jump = (values[flat + stride] - values[flat]).abs();
                    if jump > best.0 {
                        best = (jump, flat);
                    }
                }
            }
            stride *= side;
        }
        best
    }
}

pub(crate) fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn interpolate(values: &[f64], half_points: usize, spacing: f64, x: &[f64]) -> f64 {
    let d = x.len();
    let side = 2 * half_points + 1;
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for axis in 0..d {
        let s = x[axis] / spacing + half_points as f64;
        if s < 0.0 || s > (side - 1) as f64 {
            return 0.0;
        }
        let i = (s.floor() as usize).min(side - 2);
        base[axis] = i;
        frac[axis] = s - i as f64;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut weight = 1.0;
        let mut flat = 0;
        for axis in 0..d {
            let bit = (corner >> axis) & 1;
            weight *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
            flat = flat * side + base[axis] + bit;
        }
        if weight != 0.0 {
            acc += weight * values[flat];
        }
    }
    acc
}
