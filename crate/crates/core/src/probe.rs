//! Random path generators shared by the structural probes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::TimeGrid;

/// Arbitrary input trajectory: piecewise-constant Gaussian levels with a few
/// random jump locations, so both constant and switching inputs are covered.
pub(crate) fn random_input<R: Rng>(grid: &TimeGrid, rng: &mut R) -> Vec<f64> {
    let scale = 0.5 + 2.0 * rng.random::<f64>();
    let jump_p = if rng.random::<bool>() { 0.0 } else { 0.05 };
    let z: f64 = StandardNormal.sample(rng);
    let mut level = scale * z;
    (0..grid.len())
        .map(|_| {
            if rng.random::<f64>() < jump_p {
                let z: f64 = StandardNormal.sample(rng);
                level = scale * z;
            }
            level
        })
        .collect()
}

/// Output-like trajectory starting at 0: a random walk with random volatility
/// and drift.
pub(crate) fn random_output<R: Rng>(grid: &TimeGrid, rng: &mut R) -> Vec<f64> {
    let vol = (0.2 + 3.0 * rng.random::<f64>()) * grid.dt().sqrt();
    let drift = 4.0 * (rng.random::<f64>() - 0.5) * grid.dt();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    out.push(0.0);
    for _ in 0..grid.n_steps() {
        let z: f64 = StandardNormal.sample(rng);
        acc += drift + vol * z;
        out.push(acc);
    }
    out
}

/// Keeps `base[..=k]`, replaces the tail with an independent continuation and
/// bumps one coordinate after `k`.
pub(crate) fn diverge_after<R: Rng>(base: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut out = base.to_vec();
    let n = out.len();
    if k + 1 >= n {
        return out;
    }
    for j in k + 1..n {
        let z: f64 = StandardNormal.sample(rng);
        out[j] = out[j - 1] + z;
    }
    let bump_at = rng.random_range(k + 1..n);
    out[bump_at] += 1.0 + 5.0 * rng.random::<f64>();
    out
}

/// A second output path differing from `base` at or before `k`: half the time
/// a fresh walk, otherwise `base` with a single-coordinate bump at `k`.
pub(crate) fn perturb_output<R: Rng>(grid: &TimeGrid, base: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    if rng.random::<bool>() {
        let mut fresh = random_output(grid, rng);
        if fresh[..=k] == base[..=k] {
            fresh[k] += 1.0;
        }
        fresh
    } else {
        let mut out = base.to_vec();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        out[k] += sign * (0.5 + 3.0 * rng.random::<f64>());
        out
    }
}
