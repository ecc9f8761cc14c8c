use serde::{Deserialize, Serialize};

use super::{CovarianceSpec, FieldSample};

/// `V(x) = U(x) + V(0)·C(x)/C(0)`, with `V(0)` independent of the field `U`.
///
/// The continuum origin is replaced by [`Grid::origin_index`](crate::Grid::origin_index);
/// `profile` is `C(x - x_0)/C(0)` around that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub u_field: Vec<f64>,
    pub v0: f64,
    pub profile: Vec<f64>,
    pub origin_index: usize,
}

impl Decomposition {
    /// `U(x) + V(0)·profile(x)`.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.u_field.iter().zip(&self.profile).map(|(u, p)| u + self.v0 * p).collect()
    }

    /// Largest reconstruction error against `values`, in units of
    /// `ε·max(|V(x)|, |V(0)·profile(x)|)`.
    pub fn reconstruction_error_units(&self, values: &[f64]) -> f64 {
        self.reconstruct()
            .iter()
            .zip(values)
            .zip(&self.profile)
            .map(|((r, v), p)| {
                let unit = f64::EPSILON * v.abs().max((self.v0 * p).abs());
                let err = (r - v).abs();
                if err == 0.0 { 0.0 } else { err / unit }
            })
            .fold(0.0, f64::max)
    }
}

pub fn decompose(sample: &FieldSample, cov: &CovarianceSpec) -> Decomposition {
    let grid = &sample.grid;
    let origin = grid.origin_index();
    let x0 = grid.position(origin);
    let v0 = sample.values[origin];
    let profile: Vec<f64> = (0..grid.len())
        .map(|i| {
            if i == origin {
                return 1.0;
            }
            let x = grid.position(i);
            let rel = [x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]];
            cov.ratio(&rel)
        })
        .collect();
    let u_field = sample.values.iter().zip(&profile).map(|(v, p)| v - v0 * p).collect();
    Decomposition { u_field, v0, profile, origin_index: origin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::SampleSeed;
    use crate::field::{make_gaussian_kernel, sample_field};
    use crate::grid::Grid;

    #[test]
    fn reconstruction_is_exact_to_one_rounding_unit() {
        let k = make_gaussian_kernel(1.0, 1.0, 2).unwrap();
        let cov = CovarianceSpec::from_kernel(&k, None).unwrap();
        let g = Grid::new(2, 4.0, 0.25).unwrap();
        let s = sample_field(&k, &g, 3).unwrap();
        let dec = decompose(&s, &cov);
        assert_eq!(dec.u_field[dec.origin_index], 0.0);
        for (i, r) in dec.reconstruct().iter().enumerate() {
            let term = dec.v0 * dec.profile[i];
            let unit = f64::EPSILON * s.values[i].abs().max(term.abs());
            assert!((r - s.values[i]).abs() <= unit, "point {i}");
        }
        assert!(dec.reconstruction_error_units(&s.values) <= 1.0);
    }

    #[test]
    fn zero_origin_value_leaves_field_unchanged() {
        let g = Grid::new(1, 2.0, 0.25).unwrap();
        let mut values: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
        values[g.origin_index()] = 0.0;
        let s = FieldSample { grid: g, values: values.clone(), seed: SampleSeed::new(0, 0), kernel_id: String::new() };
        let cov = CovarianceSpec::gaussian(1.0, 1.0, 1, None).unwrap();
        let dec = decompose(&s, &cov);
        assert_eq!(dec.v0, 0.0);
        assert_eq!(dec.u_field, values);
    }
}
