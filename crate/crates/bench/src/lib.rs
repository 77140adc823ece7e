//! Shared fixtures for the benchmarks.

use sdelab_core::{catalog_entry, CatalogOverrides, EnsembleSpec, Path, TimeGrid};
use sdelab_core::inputs::sample_input;
use sdelab_core::simulate::simulate_output;
use sdelab_core::{NoiseBundle, SystemCatalogEntry};

pub fn entry(id: &str) -> SystemCatalogEntry {
    catalog_entry(id, &CatalogOverrides::default()).expect("catalog id")
}

/// One `(X, Y)` draw at `r` on the unit horizon with `n` steps.
pub fn draw(id: &str, n: usize, r: f64) -> (SystemCatalogEntry, Path, Path) {
    let e = entry(id);
    let grid = TimeGrid::new(1.0, n).expect("valid grid");
    let x = sample_input(&e.input, &grid, 0, 0).expect("valid input");
    let y = simulate_output(&e.system, &x, r, &NoiseBundle::generate(&grid, 0, 0), &grid).expect("finite path");
    (e, x, y)
}

pub fn spec(id: &str, n: usize, r_grid: Vec<f64>, replicates: usize) -> EnsembleSpec {
    EnsembleSpec::from_catalog(&entry(id), TimeGrid::new(1.0, n).expect("valid grid"), r_grid, replicates, 0)
}
