//! Uniform one-dimensional finite-volume grid.

use crate::error::{Error, Result};

/// Uniform cell-centered grid on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
    dx: f64,
}

/// Smallest grid the scheme accepts.
pub const MIN_CELLS: usize = 3;

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !x_min.is_finite() {
            return Err(Error::config("grid.x_min", "must be finite"));
        }
        if !x_max.is_finite() || x_max <= x_min {
            return Err(Error::config(
                "grid.x_max",
                format!("must be finite and greater than x_min = {x_min}"),
            ));
        }
        if n_cells < MIN_CELLS {
            return Err(Error::config(
                "grid.n_cells",
                format!("must be at least {MIN_CELLS}, got {n_cells}"),
            ));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
            dx: (x_max - x_min) / n_cells as f64,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Center of cell `j`.
    pub fn center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx
    }

    /// Left edge of cell `j` (`j == n_cells` gives the right boundary).
    pub fn left_edge(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(|j| self.center(j))
    }

    /// Whether `coarse` cells are unions of `self` cells.
    pub fn refines(&self, coarse: &Grid) -> Option<usize> {
        if self.x_min != coarse.x_min
            || self.x_max != coarse.x_max
            || !self.n_cells.is_multiple_of(coarse.n_cells)
        {
            return None;
        }
        Some(self.n_cells / coarse.n_cells)
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Builds a grid, validating the bounds and the cell count.
pub fn build_grid(x_min: f64, x_max: f64, n_cells: usize) -> Result<Grid> {
    Grid::new(x_min, x_max, n_cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_domain_spacing() {
        let g = build_grid(-1.0, 4.0, 1000).unwrap();
        assert!((g.dx() - 0.005).abs() < 1e-15);
        assert!((g.center(0) + 0.9975).abs() < 1e-15);
    }

    #[test]
    fn unit_interval_centers() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(g.dx(), 0.25);
        let c: Vec<f64> = g.centers().collect();
        assert_eq!(c, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn rejects_degenerate_input() {
        match build_grid(0.0, 1.0, 0) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "grid.n_cells"),
            other => panic!("expected config error, got {other:?}"),
        }
        match build_grid(1.0, 0.0, 10) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "grid.x_max"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn nesting() {
        let fine = build_grid(-1.0, 4.0, 800).unwrap();
        let coarse = build_grid(-1.0, 4.0, 200).unwrap();
        assert_eq!(fine.refines(&coarse), Some(4));
        assert_eq!(coarse.refines(&build_grid(-1.0, 4.0, 300).unwrap()), None);
    }
}
