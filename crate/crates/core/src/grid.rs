//! Cubic grids `Λ = (-L/2, L/2)^d` sampled at cell centres.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    Dimension(usize),
    #[error("spacing must be positive (got {0})")]
    Spacing(f64),
    #[error("side length must be positive (got {0})")]
    SideLength(f64),
    #[error("grid needs at least 2 points per side (L/h = {0})")]
    TooFewPoints(f64),
    #[error("side length {side} is not an integer multiple of spacing {spacing}")]
    Incommensurate { side: f64, spacing: f64 },
}

/// Cell-centred grid on the open cube `(-L/2, L/2)^d`.
///
/// Point `i` along an axis sits at `-L/2 + (i + ½)h`, so the `n = L/h` points
/// per side tile the cube exactly. Flat indices are row-major (last axis
/// fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dimension: usize,
    side_length: f64,
    spacing: f64,
    points_per_side: usize,
}

impl Grid {
    pub fn new(dimension: usize, side_length: f64, spacing: f64) -> Result<Self, GridError> {
        if !(1..=3).contains(&dimension) {
            return Err(GridError::Dimension(dimension));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(GridError::Spacing(spacing));
        }
        if !(side_length > 0.0) || !side_length.is_finite() {
            return Err(GridError::SideLength(side_length));
        }
        let ratio = side_length / spacing;
        let n = ratio.round();
        if n < 2.0 {
            return Err(GridError::TooFewPoints(ratio));
        }
        if (n * spacing - side_length).abs() > 1e-9 * side_length {
            return Err(GridError::Incommensurate { side: side_length, spacing });
        }
        Ok(Self { dimension, side_length, spacing, points_per_side: n as usize })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points_per_side(&self) -> usize {
        self.points_per_side
    }

    /// `|Λ| = L^d`.
    pub fn volume(&self) -> f64 {
        self.side_length.powi(self.dimension as i32)
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.points_per_side.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one cell, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dimension as i32)
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        -0.5 * self.side_length + (index as f64 + 0.5) * self.spacing
    }

    /// Multi-index of a flat index; unused trailing axes are 0.
    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let n = self.points_per_side;
        let mut idx = [0usize; 3];
        for axis in (0..self.dimension).rev() {
            idx[axis] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.dimension].iter().fold(0, |acc, &i| acc * self.points_per_side + i)
    }

    /// Physical position of a flat index.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dimension {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    /// Grid point nearest to the origin. For even `n` the origin falls on a
    /// cell face and the point at `+h/2` along each axis is chosen.
    pub fn origin_index(&self) -> usize {
        let mid = self.points_per_side / 2;
        self.ravel(&[mid, mid, mid])
    }

    /// Lattice step `(i - j)` between two flat indices, per axis.
    pub fn displacement(&self, from: usize, to: usize) -> [i64; 3] {
        let a = self.unravel(from);
        let b = self.unravel(to);
        let mut out = [0i64; 3];
        for axis in 0..self.dimension {
            out[axis] = b[axis] as i64 - a[axis] as i64;
        }
        out
    }
}
