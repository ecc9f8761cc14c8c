use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{CsrMatrix, OperatorError};

/// Eigenvalues below a cutoff, ascending, with multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub cutoff: f64,
    /// True when no eigenvalue below `cutoff` can have been missed.
    pub complete_below_cutoff: bool,
}

impl Spectrum {
    /// Number of eigenvalues strictly below `e`.
    pub fn count_below(&self, e: f64) -> usize {
        self.eigenvalues.partition_point(|&v| v < e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// Dense up to `dense_limit`, sparse beyond; tridiagonal matrices always use the Sturm count.
    Auto,
    /// Full dense diagonalization.
    Dense,
    /// Spectrum slicing: bisection on Sylvester-inertia counts from a banded
    /// `LDLᵀ` factorization of `H - σ`.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub path: SolverPath,
    pub dense_limit: usize,
    /// Bisection stops at intervals of width `rel_tol·‖H‖`.
    pub rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { path: SolverPath::Auto, dense_limit: 1500, rel_tol: 1e-14 }
    }
}

/// Eigenvalues with unit-norm eigenvectors (`vectors[k]` belongs to `spectrum.eigenvalues[k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    pub spectrum: Spectrum,
    pub vectors: Vec<Vec<f64>>,
}

fn check_cutoff(e_max: f64) -> Result<(), OperatorError> {
    if e_max.is_finite() {
        Ok(())
    } else {
        Err(OperatorError::NonFiniteCutoff(e_max))
    }
}

pub fn eigenvalues_below(m: &CsrMatrix, e_max: f64, opts: &SolverOptions) -> Result<Spectrum, OperatorError> {
    check_cutoff(e_max)?;
    let dense = match opts.path {
        SolverPath::Dense => true,
        SolverPath::Sparse => false,
        SolverPath::Auto => m.dim() <= opts.dense_limit && m.bandwidth() > 1,
    };
    if dense {
        let all = m.to_dense().symmetric_eigenvalues();
        let mut values: Vec<f64> = all.iter().copied().filter(|&v| v < e_max).collect();
        values.sort_by(f64::total_cmp);
        Ok(Spectrum { eigenvalues: values, cutoff: e_max, complete_below_cutoff: true })
    } else {
        slice_spectrum(m, e_max, opts.rel_tol)
    }
}

/// Dense eigenpairs below `e_max`.
pub fn eigenpairs_below(m: &CsrMatrix, e_max: f64, opts: &SolverOptions) -> Result<Eigenpairs, OperatorError> {
    check_cutoff(e_max)?;
    if m.dim() > opts.dense_limit {
        return Err(OperatorError::TooLargeForDense { dim: m.dim(), limit: opts.dense_limit });
    }
    let eig = SymmetricEigen::new(m.to_dense());
    let mut order: Vec<usize> = (0..m.dim()).filter(|&k| eig.eigenvalues[k] < e_max).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
    Ok(Eigenpairs { spectrum: Spectrum { eigenvalues, cutoff: e_max, complete_below_cutoff: true }, vectors })
}

/// Number of eigenvalues strictly below `e`, from the inertia of `H - e`.
pub fn count_below(m: &CsrMatrix, e: f64) -> Result<usize, OperatorError> {
    Band::new(m).count_below(e)
}

pub fn count_below_many(m: &CsrMatrix, energies: &[f64]) -> Result<Vec<usize>, OperatorError> {
    let band = Band::new(m);
    energies.iter().map(|&e| band.count_below(e)).collect()
}

fn slice_spectrum(m: &CsrMatrix, e_max: f64, rel_tol: f64) -> Result<Spectrum, OperatorError> {
    let band = Band::new(m);
    let (g_lo, g_hi) = m.gershgorin();
    let norm = g_lo.abs().max(g_hi.abs()).max(f64::MIN_POSITIVE);
    let tol = rel_tol * norm;
    let lo = g_lo - tol.max(1e-12 * norm);
    let hi = e_max.min(g_hi + tol.max(1e-12 * norm));
    let empty = Spectrum { eigenvalues: Vec::new(), cutoff: e_max, complete_below_cutoff: true };
    if hi <= lo {
        return Ok(empty);
    }
    let c_lo = band.count_below(lo)?;
    let c_hi = band.count_below(hi)?;
    if c_lo != 0 {
        return Err(OperatorError::SolverNotConverged(format!("{c_lo} eigenvalues below the Gershgorin bound")));
    }
    let mut values = Vec::with_capacity(c_hi);
    let mut stack = vec![(lo, hi, c_lo, c_hi)];
    while let Some((a, b, ca, cb)) = stack.pop() {
        if cb == ca {
            continue;
        }
        let mid = 0.5 * (a + b);
        if b - a <= tol || mid <= a || mid >= b {
            values.extend(std::iter::repeat_n(mid, cb - ca));
            continue;
        }
        let cm = band.count_below(mid)?;
        if cm < ca || cm > cb {
            return Err(OperatorError::SolverNotConverged(format!(
                "non-monotone inertia counts near {mid} ({ca}, {cm}, {cb})"
            )));
        }
        stack.push((mid, b, cm, cb));
        stack.push((a, mid, ca, cm));
    }
    values.sort_by(f64::total_cmp);
    if values.len() != c_hi {
        return Err(OperatorError::SolverNotConverged("slice counts do not add up".into()));
    }
    Ok(Spectrum { eigenvalues: values, cutoff: e_max, complete_below_cutoff: true })
}

/// Lower band of a symmetric matrix: `rows[i][b - (i - j)] = A(i, j)` for `i - b ≤ j ≤ i`.
struct Band {
    dim: usize,
    width: usize,
    rows: Vec<f64>,
    pivmin: f64,
}

impl Band {
    fn new(m: &CsrMatrix) -> Self {
        let dim = m.dim();
        let width = m.bandwidth();
        let stride = width + 1;
        let mut rows = vec![0.0; dim * stride];
        for i in 0..dim {
            for (j, v) in m.row(i) {
                if j <= i {
                    rows[i * stride + width - (i - j)] = v;
                }
            }
        }
        let (lo, hi) = m.gershgorin();
        let norm = lo.abs().max(hi.abs()).max(1.0);
        Self { dim, width, rows, pivmin: f64::MIN_POSITIVE * norm * norm }
    }

    /// Negative pivots of `LDLᵀ = A - shift`. Exact-zero pivots are replaced by
    /// `+pivmin`, so an eigenvalue equal to `shift` is not counted.
    fn count_below(&self, shift: f64) -> Result<usize, OperatorError> {
        if self.width == 1 {
            return self.sturm(shift);
        }
        let b = self.width;
        let stride = b + 1;
        // Rolling storage of the last b+1 rows of L (same layout as `rows`) and of D.
        let mut l = vec![0.0; stride * stride];
        let mut dvals = vec![0.0; self.dim];
        let mut w = vec![0.0; stride];
        let mut negatives = 0usize;
        for i in 0..self.dim {
            let jlo = i.saturating_sub(b);
            let slot_i = (i % stride) * stride;
            for j in jlo..i {
                let slot_j = (j % stride) * stride;
                let klo = jlo.max(j.saturating_sub(b));
                let mut s = self.rows[i * stride + b - (i - j)];
                for k in klo..j {
                    s -= w[b - (i - k)] * l[slot_j + b - (j - k)];
                }
                w[b - (i - j)] = s;
                l[slot_i + b - (i - j)] = s / dvals[j];
            }
            let mut piv = self.rows[i * stride + b] - shift;
            for k in jlo..i {
                piv -= w[b - (i - k)] * l[slot_i + b - (i - k)];
            }
            if !piv.is_finite() {
                return Err(OperatorError::SolverNotConverged(format!("non-finite pivot at row {i}")));
            }
            if piv.abs() < self.pivmin {
                piv = self.pivmin;
            }
            if piv < 0.0 {
                negatives += 1;
            }
            dvals[i] = piv;
        }
        Ok(negatives)
    }

    /// Sturm sequence count for tridiagonal matrices.
    fn sturm(&self, shift: f64) -> Result<usize, OperatorError> {
        let mut negatives = 0usize;
        let mut q = 1.0f64;
        for i in 0..self.dim {
            let diag = self.rows[i * 2 + 1] - shift;
            q = if i == 0 {
                diag
            } else {
                let off = self.rows[i * 2];
                diag - off * off / q
            };
            if !q.is_finite() {
                return Err(OperatorError::SolverNotConverged(format!("non-finite pivot at row {i}")));
            }
            if q.abs() < self.pivmin {
                q = self.pivmin;
            }
            if q < 0.0 {
                negatives += 1;
            }
        }
        Ok(negatives)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(dim: usize, band: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = rng.random_range(-3.0..3.0);
            for j in i + 1..(i + band + 1).min(dim) {
                if rng.random_bool(0.6) {
                    let v = rng.random_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        CsrMatrix::from_dense(&m)
    }

    #[test]
    fn inertia_matches_dense_counts() {
        for (dim, band, seed) in [(50, 1, 1), (80, 4, 2), (120, 9, 3)] {
            let m = random_banded(dim, band, seed);
            let all = SymmetricEigen::new(m.to_dense()).eigenvalues;
            for k in 0..40 {
                let e = -6.0 + 0.3 * k as f64 + 0.0123;
                let dense = all.iter().filter(|&&v| v < e).count();
                assert_eq!(count_below(&m, e).unwrap(), dense, "dim {dim} e {e}");
            }
        }
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let m = random_banded(200, 14, 7);
        let norm = SymmetricEigen::new(m.to_dense()).eigenvalues.amax();
        for e_max in [-1.0, 0.5, 10.0] {
            let dense = eigenvalues_below(&m, e_max, &SolverOptions { path: SolverPath::Dense, ..Default::default() }).unwrap();
            let sparse = eigenvalues_below(&m, e_max, &SolverOptions { path: SolverPath::Sparse, ..Default::default() }).unwrap();
            assert_eq!(dense.eigenvalues.len(), sparse.eigenvalues.len());
            assert!(sparse.complete_below_cutoff);
            for (a, b) in dense.eigenvalues.iter().zip(&sparse.eigenvalues) {
                assert!((a - b).abs() <= 1e-8 * norm, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn diagonal_matrix_and_multiplicity() {
        let diag = [3.0, -1.0, 0.5, 0.5, 2.0];
        let m = CsrMatrix::from_diagonal(&diag);
        for path in [SolverPath::Dense, SolverPath::Sparse] {
            let s = eigenvalues_below(&m, 10.0, &SolverOptions { path, ..Default::default() }).unwrap();
            assert_eq!(s.eigenvalues.len(), 5);
            for (a, b) in s.eigenvalues.iter().zip([-1.0, 0.5, 0.5, 2.0, 3.0]) {
                assert!((a - b).abs() < 1e-12);
            }
            let below = eigenvalues_below(&m, -2.0, &SolverOptions { path, ..Default::default() }).unwrap();
            assert!(below.eigenvalues.is_empty());
        }
        // strict inequality at an exact eigenvalue
        assert_eq!(count_below(&m, 0.5).unwrap(), 1);
        assert_eq!(count_below(&m, 2.0).unwrap(), 3);
    }

    #[test]
    fn eigenpairs_are_orthonormal() {
        let m = random_banded(60, 3, 5);
        let pairs = eigenpairs_below(&m, 0.0, &SolverOptions::default()).unwrap();
        for (k, v) in pairs.vectors.iter().enumerate() {
            let hv = m.mul_vec(v);
            let lambda = pairs.spectrum.eigenvalues[k];
            let res: f64 = hv.iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-10);
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite_cutoff() {
        let m = CsrMatrix::from_diagonal(&[1.0]);
        assert!(matches!(eigenvalues_below(&m, f64::NAN, &SolverOptions::default()), Err(OperatorError::NonFiniteCutoff(_))));
    }
}
