//! Finite-difference Hamiltonians `(-½Δ + V)_{Λ,X}` and their low-lying spectra.

mod eigen;
mod free;
mod matrix;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldSample;
use crate::ensemble::SampleSeed;
use crate::grid::Grid;
use crate::validity_cutoff;

pub use eigen::{
    count_below, count_below_many, eigenpairs_below, eigenvalues_below, Eigenpairs, SolverOptions, SolverPath,
    Spectrum,
};
pub use free::{free_spectrum, free_spectrum_1d};
pub use matrix::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("potential value {value} at point {index} is not finite")]
    NonFinitePotential { index: usize, value: f64 },
    #[error("potential has {got} values, grid has {expected} points")]
    PotentialLength { expected: usize, got: usize },
    #[error("cutoff energy {0} is not finite")]
    NonFiniteCutoff(f64),
    #[error("eigensolver did not converge: {0}")]
    SolverNotConverged(String),
    #[error("dense path limited to dimension {limit} (got {dim})")]
    TooLargeForDense { dim: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
        }
    }
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" | "d" => Ok(Self::Dirichlet),
            "neumann" | "n" => Ok(Self::Neumann),
            other => Err(format!("unknown boundary condition {other:?}")),
        }
    }
}

/// `K + diag(V)` on the cell-centred grid.
///
/// `K` is the central-difference `-½Δ`: couplings `-1/(2h²)` between nearest
/// neighbours. Dirichlet keeps the full diagonal `d/h²` (the missing neighbour
/// is a zero ghost value); Neumann mirrors the ghost onto the boundary point,
/// so its diagonal is `(number of neighbours)/(2h²)` and every kinetic row sums
/// to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub grid: Grid,
    pub bc: BoundaryCondition,
    pub potential: Vec<f64>,
    pub matrix: CsrMatrix,
}

impl Hamiltonian {
    pub fn new(grid: &Grid, bc: BoundaryCondition, potential: Vec<f64>) -> Result<Self, OperatorError> {
        if potential.len() != grid.len() {
            return Err(OperatorError::PotentialLength { expected: grid.len(), got: potential.len() });
        }
        if let Some((index, &value)) = potential.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(OperatorError::NonFinitePotential { index, value });
        }
        let matrix = kinetic(grid, bc, Some(&potential));
        Ok(Self { grid: grid.clone(), bc, potential, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn eigenvalues_below(&self, e_max: f64, opts: &SolverOptions) -> Result<Spectrum, OperatorError> {
        eigenvalues_below(&self.matrix, e_max, opts)
    }
}

/// CSV with `index,eigenvalue` columns preceded by `# key = value` metadata rows.
pub fn spectrum_csv(spectrum: &Spectrum, grid: &Grid, bc: BoundaryCondition, seed: Option<SampleSeed>) -> String {
    let mut out = String::new();
    out.push_str(&format!("# dimension = {}\n", grid.dimension()));
    out.push_str(&format!("# side_length = {:?}\n", grid.side_length()));
    out.push_str(&format!("# spacing = {:?}\n", grid.spacing()));
    out.push_str(&format!("# points_per_side = {}\n", grid.points_per_side()));
    out.push_str(&format!("# bc = {bc}\n"));
    if let Some(s) = seed {
        out.push_str(&format!("# seed_master = {}\n# seed_stream = {}\n", s.master, s.stream));
    }
    out.push_str(&format!("# cutoff = {:?}\n", spectrum.cutoff));
    out.push_str(&format!("# complete_below_cutoff = {}\n", spectrum.complete_below_cutoff));
    out.push_str(&format!("# validity_window = E <= {:?}\n", validity_cutoff(grid.spacing())));
    out.push_str("index,eigenvalue\n");
    for (i, e) in spectrum.eigenvalues.iter().enumerate() {
        out.push_str(&format!("{i},{e:?}\n"));
    }
    out
}

pub fn assemble(field: &FieldSample, bc: BoundaryCondition) -> Result<Hamiltonian, OperatorError> {
    Hamiltonian::new(&field.grid, bc, field.values.clone())
}

/// Kinetic matrix, optionally with a potential added to the diagonal.
pub fn kinetic(grid: &Grid, bc: BoundaryCondition, potential: Option<&[f64]>) -> CsrMatrix {
    let d = grid.dimension();
    let n = grid.points_per_side();
    let h2 = grid.spacing() * grid.spacing();
    let coupling = -0.5 / h2;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        let idx = grid.unravel(flat);
        let mut entries = Vec::with_capacity(2 * d + 1);
        let mut neighbours = 0usize;
        let mut stride = 1usize;
        let mut strides = [0usize; 3];
        for axis in (0..d).rev() {
            strides[axis] = stride;
            stride *= n;
        }
        for axis in 0..d {
            if idx[axis] > 0 {
                entries.push((flat - strides[axis], coupling));
                neighbours += 1;
            }
            if idx[axis] + 1 < n {
                entries.push((flat + strides[axis], coupling));
                neighbours += 1;
            }
        }
        let mut diag = match bc {
            BoundaryCondition::Dirichlet => d as f64 / h2,
            BoundaryCondition::Neumann => neighbours as f64 * 0.5 / h2,
        };
        if let Some(v) = potential {
            diag += v[flat];
        }
        entries.push((flat, diag));
        entries.sort_by_key(|e| e.0);
        rows.push(entries);
    }
    CsrMatrix::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_sample(grid: &Grid, value: f64) -> FieldSample {
        FieldSample { grid: grid.clone(), values: vec![value; grid.len()], seed: SampleSeed::new(0, 0), kernel_id: String::new() }
    }

    #[test]
    fn symmetric_and_row_sums() {
        for d in 1..=3 {
            let g = Grid::new(d, 2.0, 0.5).unwrap();
            for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
                let k = kinetic(&g, bc, None);
                assert!(k.is_symmetric());
                for (i, s) in k.row_sums().iter().enumerate() {
                    match bc {
                        BoundaryCondition::Neumann => assert_eq!(*s, 0.0, "row {i}"),
                        BoundaryCondition::Dirichlet => assert!(*s >= 0.0),
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_non_finite_potential() {
        let g = Grid::new(1, 1.0, 0.25).unwrap();
        let mut s = flat_sample(&g, 0.0);
        s.values[2] = f64::NAN;
        assert!(matches!(assemble(&s, BoundaryCondition::Dirichlet), Err(OperatorError::NonFinitePotential { index: 2, .. })));
    }

    #[test]
    fn neumann_ground_state_is_constant() {
        let g = Grid::new(2, 2.0, 0.25).unwrap();
        let h = assemble(&flat_sample(&g, 0.0), BoundaryCondition::Neumann).unwrap();
        let ones = vec![1.0; g.len()];
        let out = h.matrix.mul_vec(&ones);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
        let spec = h.eigenvalues_below(1.0, &SolverOptions::default()).unwrap();
        assert!(spec.eigenvalues[0].abs() < 1e-10);
    }

    #[test]
    fn spectrum_csv_layout() {
        let g = Grid::new(1, 4.0, 0.5).unwrap();
        let spec = Spectrum { eigenvalues: vec![-0.5, 1.25], cutoff: 2.0, complete_below_cutoff: true };
        let csv = spectrum_csv(&spec, &g, BoundaryCondition::Neumann, Some(SampleSeed::new(7, 3)));
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, ["index,eigenvalue", "0,-0.5", "1,1.25"]);
        assert!(csv.contains("# bc = neumann"));
        assert!(csv.contains("# seed_master = 7"));
        assert!(csv.contains("# validity_window = E <= 0.4"));
    }
}
