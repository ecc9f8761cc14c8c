use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FieldError, KernelShape, KernelSpec};
use crate::ensemble::{mean_and_error, SampleSeed};
use crate::grid::Grid;

/// One realization `V^(ω)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub seed: SampleSeed,
    pub kernel_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Gaussian kernels require `h ≤ ξ / resolution_factor`.
    pub resolution_factor: f64,
    /// Upper bound on the number of padded white-noise points.
    pub max_noise_points: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { resolution_factor: 4.0, max_noise_points: 1 << 26 }
    }
}

pub fn sample_field(kernel: &KernelSpec, grid: &Grid, seed: impl Into<SampleSeed>) -> Result<FieldSample, FieldError> {
    sample_field_with(kernel, grid, seed.into(), &SamplerConfig::default())
}

/// Linear convolution of padded white noise with the kernel:
/// `V(x_i) = h^{d/2} Σ_j u(x_i - y_j) g_j`, where the `g_j` are i.i.d. N(0,1)
/// on the grid extended by `ceil(R/h)` points on every side. Deviates are
/// drawn in row-major order of the padded grid from the sample's stream.
pub fn sample_field_with(
    kernel: &KernelSpec,
    grid: &Grid,
    seed: SampleSeed,
    config: &SamplerConfig,
) -> Result<FieldSample, FieldError> {
    let d = grid.dimension();
    if kernel.dimension != d {
        return Err(FieldError::DimensionMismatch { kernel: kernel.dimension, grid: d });
    }
    let h = grid.spacing();
    if let KernelShape::Gaussian { length, .. } = kernel.shape {
        let limit = length / config.resolution_factor;
        if h > limit * (1.0 + 1e-12) {
            return Err(FieldError::ResolutionTooCoarse { spacing: h, limit });
        }
    }
    let n = grid.points_per_side();
    let pad = (kernel.truncation_radius / h - 1e-9).ceil().max(0.0) as usize;
    let m = n + 2 * pad;
    let noise_points = m.checked_pow(d as u32).unwrap_or(usize::MAX);
    if noise_points > config.max_noise_points {
        return Err(FieldError::PaddingOverflow { points: noise_points, budget: config.max_noise_points });
    }

    let mut rng = seed.rng();
    let noise: Vec<f64> = (0..noise_points).map(|_| rng.sample(StandardNormal)).collect();
    let scale = h.powf(d as f64 / 2.0);

    let values = match kernel.shape {
        KernelShape::Gaussian { amplitude, length } => {
            // u factorizes over axes, so convolve one axis at a time.
            let taps: Vec<f64> = (0..=2 * pad)
                .map(|k| {
                    let x = (k as f64 - pad as f64) * h;
                    if x.abs() > kernel.truncation_radius {
                        0.0
                    } else {
                        (-x * x / (length * length)).exp()
                    }
                })
                .collect();
            let mut data = noise;
            let mut shape = [1usize; 3];
            shape[..d].fill(m);
            for axis in 0..d {
                data = convolve_axis(&data, &mut shape, d, axis, &taps, n);
            }
            let factor = amplitude * scale;
            data.iter_mut().for_each(|v| *v *= factor);
            data
        }
        KernelShape::Tabulated { .. } => convolve_full(kernel, &noise, d, n, pad, h, scale),
    };
    Ok(FieldSample { grid: grid.clone(), values, seed, kernel_id: kernel.label() })
}

/// Valid-mode 1-d correlation along `axis`: output length `out_len` from
/// input length `out_len + taps.len() - 1`. Output `i` sums
/// `taps[k] · in[i + taps.len() - 1 - k]`, i.e. `u(x_i - y_j)` with
/// `y_j` at input index `j`.
fn convolve_axis(data: &[f64], shape: &mut [usize; 3], d: usize, axis: usize, taps: &[f64], out_len: usize) -> Vec<f64> {
    let in_len = shape[axis];
    let stride: usize = shape[axis + 1..d].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![0.0; outer * out_len * stride];
    let last = taps.len() - 1;
    for o in 0..outer {
        for i in 0..out_len {
            let dst = (o * out_len + i) * stride;
            for (k, &w) in taps.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let src = (o * in_len + i + last - k) * stride;
                for s in 0..stride {
                    out[dst + s] += w * data[src + s];
                }
            }
        }
    }
    shape[axis] = out_len;
    out
}

fn convolve_full(kernel: &KernelSpec, noise: &[f64], d: usize, n: usize, pad: usize, h: f64, scale: f64) -> Vec<f64> {
    let width = 2 * pad + 1;
    let m = n + 2 * pad;
    let stencil_len = width.pow(d as u32);
    // Stencil entry for offset k (= i + pad - j per axis) is u(k h).
    let mut stencil = Vec::with_capacity(stencil_len);
    let mut x = [0.0; 3];
    for flat in 0..stencil_len {
        let mut rest = flat;
        for axis in (0..d).rev() {
            x[axis] = ((rest % width) as f64 - pad as f64) * h;
            rest /= width;
        }
        stencil.push(kernel.evaluate(&x[..d]) * scale);
    }
    let total = n.pow(d as u32);
    let mut out = vec![0.0; total];
    for (flat, value) in out.iter_mut().enumerate() {
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for axis in (0..d).rev() {
            idx[axis] = rest % n;
            rest /= n;
        }
        let mut acc = 0.0;
        for (s, &w) in stencil.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let mut rest = s;
            let mut src = 0usize;
            let mut koff = [0usize; 3];
            for axis in (0..d).rev() {
                koff[axis] = rest % width;
                rest /= width;
            }
            for axis in 0..d {
                // j = i + pad - (k - pad) in padded coordinates, with i shifted by pad.
                src = src * m + idx[axis] + 2 * pad - koff[axis];
            }
            acc += w * noise[src];
        }
        *value = acc;
    }
    out
}

/// One row of [`empirical_covariance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub offset: Vec<i64>,
    pub estimate: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of `E[V(x) V(x+δ)]` for lattice offsets `δ`: per
/// sample, the mean over all base points whose partner lies in the grid; then
/// the mean and between-sample standard error over the ensemble.
pub fn empirical_covariance(samples: &[FieldSample], offsets: &[Vec<i64>]) -> Result<Vec<CovarianceEstimate>, FieldError> {
    empirical_covariance_where(samples, offsets, |_| true)
}

/// As [`empirical_covariance`], restricted to base points accepted by `base`
/// (a predicate on the base point's multi-index).
pub fn empirical_covariance_where(
    samples: &[FieldSample],
    offsets: &[Vec<i64>],
    base: impl Fn(&[usize]) -> bool,
) -> Result<Vec<CovarianceEstimate>, FieldError> {
    if samples.len() < 2 {
        return Err(FieldError::TooFewSamples { needed: 2, got: samples.len() });
    }
    if offsets.is_empty() {
        return Err(FieldError::EmptyOffsets);
    }
    let grid = &samples[0].grid;
    if samples.iter().any(|s| s.grid != *grid || s.values.len() != grid.len()) {
        return Err(FieldError::MismatchedGrids);
    }
    let d = grid.dimension();
    let n = grid.points_per_side() as i64;
    offsets
        .iter()
        .map(|offset| {
            if offset.len() != d {
                return Err(FieldError::DimensionMismatch { kernel: offset.len(), grid: d });
            }
            let pairs: Vec<(usize, usize)> = (0..grid.len())
                .filter_map(|flat| {
                    let idx = grid.unravel(flat);
                    if !base(&idx[..d]) {
                        return None;
                    }
                    let mut partner = [0usize; 3];
                    for axis in 0..d {
                        let p = idx[axis] as i64 + offset[axis];
                        if p < 0 || p >= n {
                            return None;
                        }
                        partner[axis] = p as usize;
                    }
                    Some((flat, grid.ravel(&partner)))
                })
                .collect();
            let per_sample: Vec<f64> = samples
                .iter()
                .map(|s| {
                    if pairs.is_empty() {
                        return 0.0;
                    }
                    let sum = crate::ensemble::compensated_sum(pairs.iter().map(|&(a, b)| s.values[a] * s.values[b]));
                    sum / pairs.len() as f64
                })
                .collect();
            let (estimate, std_error) = mean_and_error(&per_sample);
            Ok(CovarianceEstimate { offset: offset.clone(), estimate, std_error })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_gaussian_kernel;

    #[test]
    fn zero_kernel_gives_zero_field() {
        let g = Grid::new(2, 4.0, 0.25).unwrap();
        let s = sample_field(&KernelSpec::zero(2), &g, 9).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic() {
        let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
        let g = Grid::new(1, 8.0, 0.125).unwrap();
        let a = sample_field(&k, &g, SampleSeed::new(5, 3)).unwrap();
        let b = sample_field(&k, &g, SampleSeed::new(5, 3)).unwrap();
        assert_eq!(a.values, b.values);
        let c = sample_field(&k, &g, SampleSeed::new(5, 4)).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn resolution_and_budget_guards() {
        let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
        let coarse = Grid::new(1, 8.0, 0.5).unwrap();
        assert!(matches!(sample_field(&k, &coarse, 0), Err(FieldError::ResolutionTooCoarse { .. })));
        let g = Grid::new(2, 8.0, 0.125).unwrap();
        let k2 = make_gaussian_kernel(1.0, 1.0, 2).unwrap();
        let tight = SamplerConfig { max_noise_points: 1000, ..Default::default() };
        assert!(matches!(sample_field_with(&k2, &g, 0.into(), &tight), Err(FieldError::PaddingOverflow { .. })));
        assert!(matches!(sample_field(&k2, &coarse, 0), Err(FieldError::DimensionMismatch { .. })));
    }

    /// Riemann-sum covariance `h^d Σ_j u(x+y_j) u(y_j)` of the discretized field.
    fn discrete_covariance(k: &KernelSpec, h: f64, lag: i64, pad: i64) -> f64 {
        (-2 * pad..=2 * pad)
            .map(|j| k.evaluate(&[(j + lag) as f64 * h]) * k.evaluate(&[j as f64 * h]))
            .sum::<f64>()
            * h
    }

    #[test]
    fn separable_path_matches_full_stencil() {
        // A tabulated copy of the Gaussian kernel on the sampling lattice must
        // produce the same field through the generic stencil path.
        let k = make_gaussian_kernel(1.0, 1.0, 2).unwrap();
        let h = 0.25;
        let pad = 24i64;
        let vals: Vec<f64> = (0..(2 * pad + 1).pow(2))
            .map(|f| {
                let (a, b) = (f / (2 * pad + 1) - pad, f % (2 * pad + 1) - pad);
                k.evaluate(&[a as f64 * h, b as f64 * h])
            })
            .collect();
        let t = KernelSpec::tabulated(2, vals, h, (10.0, 1.0), (1e30, 1.0)).unwrap();
        let g = Grid::new(2, 3.0, h).unwrap();
        let a = sample_field(&k, &g, 11).unwrap();
        let b = sample_field(&t, &g, 11).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn riemann_covariance_is_close_to_continuum() {
        let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
        for lag in [0, 8, 16] {
            let disc = discrete_covariance(&k, 0.125, lag, 48);
            let exact = crate::field::analytic_covariance(&k, &[lag as f64 * 0.125]);
            assert!((disc - exact).abs() < 1e-10, "lag {lag}: {disc} vs {exact}");
        }
    }

    #[test]
    fn covariance_of_zero_samples() {
        let g = Grid::new(1, 2.0, 0.25).unwrap();
        let s = sample_field(&KernelSpec::zero(1), &g, 0).unwrap();
        let est = empirical_covariance(&[s.clone(), s], &[vec![0], vec![3]]).unwrap();
        for e in est {
            assert_eq!((e.estimate, e.std_error), (0.0, 0.0));
        }
    }

    #[test]
    fn covariance_errors() {
        let g = Grid::new(1, 2.0, 0.25).unwrap();
        let g2 = Grid::new(1, 4.0, 0.25).unwrap();
        let k = KernelSpec::zero(1);
        let a = sample_field(&k, &g, 0).unwrap();
        let b = sample_field(&k, &g2, 0).unwrap();
        assert_eq!(empirical_covariance(&[a.clone(), b], &[vec![0]]), Err(FieldError::MismatchedGrids));
        assert_eq!(empirical_covariance(&[a.clone(), a.clone()], &[]), Err(FieldError::EmptyOffsets));
        assert!(matches!(empirical_covariance(&[a], &[vec![0]]), Err(FieldError::TooFewSamples { .. })));
    }
}
