//! Uniform time grids on `[0, T]` and scalar sample paths living on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform discretization of `[0, T]` into `N` steps of width `T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `N + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Grid point `t_k`; `t_N` is exactly the horizon.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.n_steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

/// Values of a scalar process at every point of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(step) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Partial sums of increments, starting at zero.
    pub fn from_increments(grid: TimeGrid, increments: &[f64]) -> Result<Self> {
        if increments.len() != grid.n_steps() {
            return Err(Error::LengthMismatch { expected: grid.n_steps(), got: increments.len() });
        }
        let mut values = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        values.push(acc);
        for dw in increments {
            acc += dw;
            values.push(acc);
        }
        Self::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if self.values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: self.values.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        for n in [1, 3, 7, 200, 1000] {
            let grid = TimeGrid::new(0.3, n).unwrap();
            assert_eq!(grid.time(0), 0.0);
            assert_eq!(grid.time(n), 0.3);
            let t = grid.times();
            assert!(t.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
        assert!(TimeGrid::new(f64::NAN, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn path_rejects_non_finite_and_wrong_length() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        assert!(Path::new(grid, vec![0.0, 1.0]).is_err());
        assert_eq!(Path::new(grid, vec![0.0, f64::INFINITY, 1.0]), Err(Error::NonFinite { step: 1 }));
    }

    #[test]
    fn increments_round_trip() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let p = Path::from_increments(grid, &[0.5, -1.0, 0.25, 2.0]).unwrap();
        assert_eq!(p.values(), &[0.0, 0.5, -0.5, -0.25, 1.75]);
        assert_eq!(p.increments(), vec![0.5, -1.0, 0.25, 2.0]);
    }
}
