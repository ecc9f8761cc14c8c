use serde::{Deserialize, Serialize};

use super::kernel::sup_norm;
use super::{FieldError, KernelShape, KernelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceForm {
    /// `C(x) = σ² exp(-|x|²/(2ξ²))`.
    Gaussian { sigma: f64, length: f64 },
    /// `C = u * u` for the given kernel.
    FromKernel(KernelSpec),
}

/// Covariance function with its variance `C(0)` and correlation window:
/// `γ = inf_{|x|_∞ < ℓ/2} C(x)/C(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub dimension: usize,
    pub form: CovarianceForm,
    pub c0: f64,
    pub window_ell: f64,
    pub window_gamma: f64,
}

impl CovarianceSpec {
    /// Gaussian covariance; `ell` defaults to `ξ`.
    pub fn gaussian(sigma: f64, xi: f64, d: usize, ell: Option<f64>) -> Result<Self, FieldError> {
        if !(1..=3).contains(&d) {
            return Err(FieldError::InvalidDimension(d));
        }
        for (name, v) in [("sigma", sigma), ("xi", xi)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FieldError::NonPositive { name, value: v });
            }
        }
        Self::with_form(d, CovarianceForm::Gaussian { sigma, length: xi }, ell.unwrap_or(xi))
    }

    /// Covariance generated by a kernel; `ell` defaults to the Gaussian length
    /// of the kernel, or `R/6` for tabulated kernels.
    pub fn from_kernel(kernel: &KernelSpec, ell: Option<f64>) -> Result<Self, FieldError> {
        let default_ell = kernel.gaussian_length().unwrap_or(kernel.truncation_radius / 6.0);
        Self::with_form(kernel.dimension, CovarianceForm::FromKernel(kernel.clone()), ell.unwrap_or(default_ell))
    }

    fn with_form(dimension: usize, form: CovarianceForm, ell: f64) -> Result<Self, FieldError> {
        let mut spec = Self { dimension, form, c0: 0.0, window_ell: ell, window_gamma: 1.0 };
        spec.c0 = spec.evaluate(&[0.0; 3]);
        if !(spec.c0 > 0.0) {
            return Err(FieldError::NonPositive { name: "C(0)", value: spec.c0 });
        }
        spec.window_gamma = correlation_window(&spec, ell)?;
        Ok(spec)
    }

    /// Same covariance with a different window length `ℓ`; `γ` is recomputed.
    pub fn with_window(&self, ell: f64) -> Result<Self, FieldError> {
        let gamma = correlation_window(self, ell)?;
        Ok(Self { window_ell: ell, window_gamma: gamma, ..self.clone() })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match &self.form {
            CovarianceForm::Gaussian { sigma, length } => {
                let r2: f64 = x[..self.dimension].iter().map(|v| v * v).sum();
                sigma * sigma * (-r2 / (2.0 * length * length)).exp()
            }
            CovarianceForm::FromKernel(k) => analytic_covariance(k, x),
        }
    }

    /// `C(x)/C(0)`.
    pub fn ratio(&self, x: &[f64]) -> f64 {
        self.evaluate(x) / self.c0
    }
}

/// `C(x) = ∫ u(x+y) u(y) dy`: closed form for Gaussian kernels, trapezoid
/// rule on the table for tabulated ones. Zero for `|x|_∞ > 2R`.
pub fn analytic_covariance(kernel: &KernelSpec, x: &[f64]) -> f64 {
    let d = kernel.dimension;
    let mut x: Vec<f64> = x[..d].to_vec();
    if sup_norm(&x) > 2.0 * kernel.truncation_radius {
        return 0.0;
    }
    // C(x) = C(-x); evaluate on a canonical representative so the symmetry is exact.
    if x.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0) {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    match &kernel.shape {
        KernelShape::Gaussian { amplitude, length } => {
            let variance = amplitude * amplitude * (std::f64::consts::PI * length * length / 2.0).powf(d as f64 / 2.0);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            variance * (-r2 / (2.0 * length * length)).exp()
        }
        KernelShape::Tabulated { values, half_points, spacing } => {
            let side = 2 * half_points + 1;
            let mut acc = 0.0;
            let mut y = vec![0.0; d];
            let mut shifted = vec![0.0; d];
            for (flat, &uy) in values.iter().enumerate() {
                if uy == 0.0 {
                    continue;
                }
                let mut rest = flat;
                let mut weight = 1.0;
                for axis in (0..d).rev() {
                    let i = rest % side;
                    rest /= side;
                    y[axis] = (i as f64 - *half_points as f64) * spacing;
                    if i == 0 || i == side - 1 {
                        weight *= 0.5;
                    }
                }
                for axis in 0..d {
                    shifted[axis] = x[axis] + y[axis];
                }
                acc += weight * kernel.evaluate(&shifted) * uy;
            }
            acc * spacing.powi(d as i32)
        }
    }
}

/// Minimum of `C(x)/C(0)` over the closed box `|x|_∞ ≤ half_width`, by grid
/// scans refined until the value changes by less than 1e-6 relative.
pub fn box_min_ratio(cov: &CovarianceSpec, half_width: f64) -> f64 {
    let d = cov.dimension;
    let cheap = matches!(cov.form, CovarianceForm::Gaussian { .. });
    let budget: usize = if cheap { 1 << 21 } else { 1 << 14 };
    let mut previous: Option<f64> = None;
    let mut per_side = 5usize;
    loop {
        let total = per_side.pow(d as u32);
        let mut min = f64::INFINITY;
        let mut x = [0.0; 3];
        for flat in 0..total {
            let mut rest = flat;
            for coord in x.iter_mut().take(d) {
                let i = rest % per_side;
                rest /= per_side;
                *coord = -half_width + 2.0 * half_width * i as f64 / (per_side - 1) as f64;
            }
            min = min.min(cov.ratio(&x));
        }
        if let Some(prev) = previous {
            if (min - prev).abs() <= 1e-6 * min.abs().max(f64::MIN_POSITIVE) {
                return min;
            }
        }
        let next = 2 * per_side - 1;
        if next.pow(d as u32) > budget {
            return min;
        }
        previous = Some(min);
        per_side = next;
    }
}

/// `γ = inf_{|x|_∞ < ℓ/2} C(x)/C(0)`, which for continuous `C` equals the
/// minimum over the closed box.
pub fn correlation_window(cov: &CovarianceSpec, ell: f64) -> Result<f64, FieldError> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(FieldError::NonPositive { name: "ell", value: ell });
    }
    let gamma = box_min_ratio(cov, ell / 2.0);
    if gamma <= 0.0 {
        return Err(FieldError::NonPositiveGamma { ell, gamma });
    }
    Ok(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_gaussian_kernel;
    use proptest::prelude::*;

    #[test]
    fn gaussian_values() {
        let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
        assert!((analytic_covariance(&k, &[0.0]) - 1.0).abs() < 1e-15);
        let c = analytic_covariance(&k, &[std::f64::consts::SQRT_2]);
        assert!((c - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(analytic_covariance(&k, &[12.01]), 0.0);
    }

    #[test]
    fn tabulated_convolution_matches_gaussian_closed_form() {
        // Sample the Gaussian kernel finely; the trapezoid convolution must
        // reproduce σ² e^{-x²/2ξ²} (the cross-check of the closed form).
        let g = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
        let s = 0.02;
        let m = 300;
        let vals: Vec<f64> = (-(m as i64)..=m as i64).map(|i| g.evaluate(&[i as f64 * s])).collect();
        let t = KernelSpec::tabulated_with_estimated_constants(1, vals, s).unwrap();
        // On table nodes the rule is exact to quadrature error; between nodes
        // linear interpolation costs O(s²).
        for (x, tol) in [(0.0, 1e-6), (0.5, 1e-6), (1.42, 1e-6), (3.0, 1e-6), (std::f64::consts::SQRT_2, 1e-4)] {
            let exact = analytic_covariance(&g, &[x]);
            let numeric = analytic_covariance(&t, &[x]);
            assert!((exact - numeric).abs() < tol, "x={x}: {exact} vs {numeric}");
        }
    }

    #[test]
    fn gamma_examples() {
        let cov = CovarianceSpec::gaussian(1.0, 1.0, 2, Some(1.0)).unwrap();
        assert!((cov.window_gamma - (-0.25f64).exp()).abs() < 1e-12);
        let small = correlation_window(&cov, 1e-4).unwrap();
        assert!((small - 1.0).abs() < 1e-8);
        let a = CovarianceSpec::gaussian(3.0, 2.0, 1, Some(2.0)).unwrap();
        let b = CovarianceSpec::gaussian(1.0, 2.0, 1, Some(2.0)).unwrap();
        assert!((a.window_gamma - b.window_gamma).abs() < 1e-15);
    }

    #[test]
    fn gamma_brute_force_oracle() {
        // Independent fine scan of the 2-d box for ℓ = ξ = 1.
        let n = 401;
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let x = -0.5 + i as f64 / (n - 1) as f64;
                let y = -0.5 + j as f64 / (n - 1) as f64;
                min = min.min((-(x * x + y * y) / 2.0).exp());
            }
        }
        let cov = CovarianceSpec::gaussian(1.0, 1.0, 2, Some(1.0)).unwrap();
        assert!((cov.window_gamma - min).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_gamma_is_an_error() {
        // Tent covariance with support radius 1: γ = 0 for ℓ = 4.
        let k = KernelSpec::tabulated(1, vec![0.0, 1.0, 0.0], 0.5, (2.0, 1.0), (1.0, 1.0)).unwrap();
        let cov = CovarianceSpec::from_kernel(&k, Some(0.1)).unwrap();
        assert!(matches!(correlation_window(&cov, 4.0), Err(FieldError::NonPositiveGamma { .. })));
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(x in -8.0f64..8.0, y in -8.0f64..8.0) {
            let g = make_gaussian_kernel(1.7, 0.9, 2).unwrap();
            let vals: Vec<f64> = (0..81).map(|i| {
                let (a, b) = ((i / 9) as f64 - 4.0, (i % 9) as f64 - 4.0);
                (-(a * a + b * b) / 4.0).exp()
            }).collect();
            let t = KernelSpec::tabulated(2, vals, 0.5, (10.0, 1.0), (10.0, 1.0)).unwrap();
            for k in [&g, &t] {
                let c = analytic_covariance(k, &[x, y]);
                prop_assert_eq!(c, analytic_covariance(k, &[-x, -y]));
                prop_assert!(c <= analytic_covariance(k, &[0.0, 0.0]) * (1.0 + 1e-12));
                prop_assert!(c >= 0.0);
            }
        }
    }
}
