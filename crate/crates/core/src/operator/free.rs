use super::{BoundaryCondition, Spectrum};
use crate::grid::Grid;

/// Spectrum of the 1-d discrete `-½Δ` with `n` points:
/// Dirichlet `(2/h²) sin²(πm/(2(n+1)))`, `m = 1..=n`;
/// Neumann `(2/h²) sin²(πm/(2n))`, `m = 0..n`.
pub fn free_spectrum_1d(n: usize, h: f64, bc: BoundaryCondition) -> Vec<f64> {
    let scale = 2.0 / (h * h);
    let (ms, denom): (Vec<usize>, f64) = match bc {
        BoundaryCondition::Dirichlet => ((1..=n).collect(), 2.0 * (n + 1) as f64),
        BoundaryCondition::Neumann => ((0..n).collect(), 2.0 * n as f64),
    };
    ms.into_iter()
        .map(|m| {
            let s = (std::f64::consts::PI * m as f64 / denom).sin();
            scale * s * s
        })
        .collect()
}

/// Closed-form spectrum of the discrete `-½Δ` on `grid`: all `d`-fold sums of
/// the 1-d eigenvalues, truncated below `e_max`.
pub fn free_spectrum(grid: &Grid, bc: BoundaryCondition, e_max: f64) -> Spectrum {
    let one = free_spectrum_1d(grid.points_per_side(), grid.spacing(), bc);
    let mut out = Vec::new();
    fn recurse(one: &[f64], depth: usize, partial: f64, e_max: f64, out: &mut Vec<f64>) {
        for &v in one {
            let s = partial + v;
            // `one` is ascending, so later terms only grow.
            if s >= e_max && depth == 1 {
                break;
            }
            if depth == 1 {
                out.push(s);
            } else if s + one[0] * (depth - 1) as f64 >= e_max {
                break;
            } else {
                recurse(one, depth - 1, s, e_max, out);
            }
        }
    }
    recurse(&one, grid.dimension(), 0.0, e_max, &mut out);
    out.sort_by(f64::total_cmp);
    Spectrum { eigenvalues: out, cutoff: e_max, complete_below_cutoff: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{kinetic, SolverOptions, SolverPath};

    #[test]
    fn two_d_is_pairwise_sums() {
        let g1 = Grid::new(1, 2.0, 0.25).unwrap();
        let g2 = Grid::new(2, 2.0, 0.25).unwrap();
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let one = free_spectrum(&g1, bc, 1e9).eigenvalues;
            let mut sums: Vec<f64> = one.iter().flat_map(|a| one.iter().map(move |b| a + b)).collect();
            sums.sort_by(f64::total_cmp);
            assert_eq!(free_spectrum(&g2, bc, 1e9).eigenvalues, sums);
        }
    }

    #[test]
    fn neumann_contains_zero() {
        let g = Grid::new(1, 3.0, 0.5).unwrap();
        assert_eq!(free_spectrum(&g, BoundaryCondition::Neumann, 1.0).eigenvalues[0], 0.0);
    }

    #[test]
    fn matches_dense_diagonalization() {
        for (d, side, h) in [(1, 4.0, 0.125), (2, 2.0, 0.2), (3, 1.0, 0.2)] {
            let g = Grid::new(d, side, h).unwrap();
            for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
                let k = kinetic(&g, bc, None);
                let e_max = 0.4713 * (2.0 * d as f64 / (h * h));
                let dense =
                    crate::operator::eigenvalues_below(&k, e_max, &SolverOptions { path: SolverPath::Dense, ..Default::default() })
                        .unwrap();
                let closed = free_spectrum(&g, bc, e_max);
                assert_eq!(dense.eigenvalues.len(), closed.eigenvalues.len(), "d={d} {bc}");
                let norm = 2.0 * d as f64 / (h * h);
                for (a, b) in dense.eigenvalues.iter().zip(&closed.eigenvalues) {
                    assert!((a - b).abs() <= 1e-10 * norm, "{a} vs {b}");
                }
            }
        }
    }
}
