use gauss_schrodinger::field::{empirical_covariance_where, snapshot};
use gauss_schrodinger::{
    decompose, empirical_covariance, make_gaussian_kernel, sample_field, CovarianceSpec, Ensemble, FieldSample, Grid,
    KernelSpec,
};

fn ensemble_samples(kernel: &KernelSpec, grid: &Grid, m: usize, seed: u64) -> Vec<FieldSample> {
    Ensemble::new(m, seed).map(|s| sample_field(kernel, grid, s).unwrap())
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[test]
fn pointwise_mean_variance_and_kurtosis() {
    let k = make_gaussian_kernel(1.5, 1.0, 1).unwrap();
    let g = Grid::new(1, 8.0, 0.125).unwrap();
    let m = 4000;
    let samples = ensemble_samples(&k, &g, m, 11);
    for point in [0, g.origin_index(), g.len() - 1] {
        let v: Vec<f64> = samples.iter().map(|s| s.values[point]).collect();
        let (mean, se) = mean_se(&v);
        assert!(mean.abs() < 5.0 * se, "mean {mean} ± {se}");
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let (var, var_se) = mean_se(&sq);
        assert!((var - 2.25).abs() < 5.0 * var_se, "variance {var} ± {var_se}");
        let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
        let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / m as f64;
        let excess = m4 / (m2 * m2) - 3.0;
        assert!(excess.abs() < 5.0 * (24.0 / m as f64).sqrt(), "excess kurtosis {excess}");
    }
}

#[test]
fn covariance_vanishes_beyond_twice_the_truncation_radius() {
    let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
    let g = Grid::new(1, 16.0, 0.25).unwrap();
    let samples = ensemble_samples(&k, &g, 500, 3);
    let steps = (2.0 * k.truncation_radius / 0.25).ceil() as i64 + 2;
    let est = &empirical_covariance(&samples, &[vec![steps]]).unwrap()[0];
    assert!(est.estimate.abs() < 5.0 * est.std_error, "{est:?}");
}

#[test]
fn homogeneity_across_base_point_subsets() {
    let k = make_gaussian_kernel(1.0, 1.0, 2).unwrap();
    let g = Grid::new(2, 4.0, 0.25).unwrap();
    let samples = ensemble_samples(&k, &g, 600, 5);
    let n = g.points_per_side();
    let offsets = vec![vec![0, 0], vec![2, 0], vec![1, 3]];
    let left = empirical_covariance_where(&samples, &offsets, |i| i[0] < n / 2).unwrap();
    let right = empirical_covariance_where(&samples, &offsets, |i| i[0] >= n / 2).unwrap();
    for (a, b) in left.iter().zip(&right) {
        let combined = a.std_error.hypot(b.std_error);
        assert!((a.estimate - b.estimate).abs() < 5.0 * combined, "{a:?} vs {b:?}");
    }
}

#[test]
fn decomposition_matches_gaussian_conditioning() {
    let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
    let cov = CovarianceSpec::gaussian(1.0, 1.0, 1, None).unwrap();
    let g = Grid::new(1, 4.0, 0.25).unwrap();
    let m = 10_000;
    let decs: Vec<_> = ensemble_samples(&k, &g, m, 17).iter().map(|s| decompose(s, &cov)).collect();
    let x0 = g.coordinate(g.origin_index());
    let c = |x: f64| (-x * x / 2.0).exp();
    for (i, j) in [(0usize, 15usize), (3, 3), (5, 12), (10, 11)] {
        let (xi, xj) = (g.coordinate(i) - x0, g.coordinate(j) - x0);
        let target = c(xi - xj) - c(xi) * c(xj);
        let prod: Vec<f64> = decs.iter().map(|d| d.u_field[i] * d.u_field[j]).collect();
        let (est, se) = mean_se(&prod);
        assert!((est - target).abs() < 5.0 * se, "({i},{j}): {est} ± {se} vs {target}");
    }
}

#[test]
fn origin_value_is_uncorrelated_with_remainder() {
    let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
    let cov = CovarianceSpec::gaussian(1.0, 1.0, 1, None).unwrap();
    let g = Grid::new(1, 8.0, 0.125).unwrap();
    let m = 2000;
    let decs: Vec<_> = ensemble_samples(&k, &g, m, 23).iter().map(|s| decompose(s, &cov)).collect();
    for point in [0, g.origin_index() + 4, g.len() - 9] {
        let a: Vec<f64> = decs.iter().map(|d| d.v0).collect();
        let b: Vec<f64> = decs.iter().map(|d| d.u_field[point]).collect();
        let (ma, mb) = (mean_se(&a).0, mean_se(&b).0);
        let sab: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        let corr = sab / (saa * sbb).sqrt();
        assert!(corr.abs() < 5.0 / (m as f64).sqrt(), "point {point}: corr {corr}");
    }
}

fn golden_sample() -> FieldSample {
    let k = make_gaussian_kernel(1.0, 1.0, 1).unwrap();
    let g = Grid::new(1, 2.0, 0.25).unwrap();
    sample_field(&k, &g, 42).unwrap()
}

#[test]
fn golden_snapshot_is_reproduced() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/field_d1_seed42.txt");
    let text = snapshot::to_string(&golden_sample());
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(path, &text).unwrap();
    }
    let expected = std::fs::read_to_string(path).expect("golden file present");
    assert_eq!(text, expected);
    let back = snapshot::read(expected.as_bytes()).unwrap();
    assert_eq!(back, golden_sample());
}
