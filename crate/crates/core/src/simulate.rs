//! Euler–Maruyama simulation of the output process and the
//! non-anticipativity probe.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Path, TimeGrid};
use crate::noise::{stream_rng, NoiseBundle, StreamDomain};
use crate::probe;
use crate::system::FunctionalSystem;

fn check_r(r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidSpec(format!("r must be a finite non-negative number, got {r}")));
    }
    Ok(())
}

/// Runs `y_{k+1} = y_k + √r·F(k, x, y)·Δ + G(k, y)·ΔW_k` from `y_0 = 0`.
pub fn simulate_output(
    system: &FunctionalSystem,
    x: &Path,
    r: f64,
    noise: &NoiseBundle,
    grid: &TimeGrid,
) -> Result<Path> {
    check_r(r)?;
    x.check_grid(grid)?;
    if noise.len() != grid.n_steps() {
        return Err(Error::LengthMismatch { expected: grid.n_steps(), got: noise.len() });
    }
    let values = euler_maruyama(system, x.values(), r.sqrt(), noise.increments(), grid.dt())?;
    Path::new(*grid, values)
}

pub(crate) fn euler_maruyama(
    system: &FunctionalSystem,
    x: &[f64],
    sqrt_r: f64,
    dw: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let mut y = vec![0.0; dw.len() + 1];
    for k in 0..dw.len() {
        let g = system.diffusion(k, &y)?;
        let f = if sqrt_r == 0.0 { 0.0 } else { system.drift(k, x, &y) };
        let next = y[k] + sqrt_r * f * dt + g * dw[k];
        if !next.is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
        y[k + 1] = next;
    }
    Ok(y)
}

/// One output path per `r`, all driven by the same increments.
pub fn simulate_coupled(
    system: &FunctionalSystem,
    x: &Path,
    r_list: &[f64],
    noise: &NoiseBundle,
    grid: &TimeGrid,
) -> Result<Vec<Path>> {
    if r_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidSpec("r_list must be ascending".into()));
    }
    r_list.iter().map(|&r| simulate_output(system, x, r, noise, grid)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnticipativityWitness {
    pub step: usize,
    pub functional: &'static str,
    pub first: f64,
    pub second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnticipativityReport {
    pub probes: usize,
    pub passed: bool,
    pub counterexample: Option<AnticipativityWitness>,
}

/// Evaluates `F` and `G` on path pairs that agree on `0..=k` and differ
/// afterwards; any difference in output is a counterexample.
pub fn probe_non_anticipativity(
    system: &FunctionalSystem,
    grid: &TimeGrid,
    n_probes: usize,
    seed: u64,
) -> AnticipativityReport {
    let mut rng = stream_rng(seed, StreamDomain::Probe, 0, 0x616e_7469);
    for _ in 0..n_probes {
        let k = rng.random_range(0..grid.n_steps());
        let f1 = probe::random_input(grid, &mut rng);
        let g1 = probe::random_output(grid, &mut rng);
        let f2 = probe::diverge_after(&f1, k, &mut rng);
        let g2 = probe::diverge_after(&g1, k, &mut rng);

        let (a, b) = (system.drift(k, &f1, &g1), system.drift(k, &f2, &g2));
        if a.to_bits() != b.to_bits() {
            return AnticipativityReport {
                probes: n_probes,
                passed: false,
                counterexample: Some(AnticipativityWitness { step: k, functional: "F", first: a, second: b }),
            };
        }
        let (a, b) = (system.diffusion_raw(k, &g1), system.diffusion_raw(k, &g2));
        if a.to_bits() != b.to_bits() {
            return AnticipativityReport {
                probes: n_probes,
                passed: false,
                counterexample: Some(AnticipativityWitness { step: k, functional: "G", first: a, second: b }),
            };
        }
    }
    AnticipativityReport { probes: n_probes, passed: true, counterexample: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 50).unwrap()
    }

    #[test]
    fn zero_drift_gives_brownian_partial_sums() {
        let g = grid();
        let sys = FunctionalSystem::new("zero", 1.0, |_, _, _| 0.0, |_, _| 1.0).unwrap();
        let noise = NoiseBundle::generate(&g, 1, 0);
        let x = Path::constant(g, 3.0);
        for r in [0.0, 1.0, 9.0] {
            let y = simulate_output(&sys, &x, r, &noise, &g).unwrap();
            let w = Path::from_increments(g, noise.increments()).unwrap();
            assert_eq!(y.values(), w.values());
        }
    }

    #[test]
    fn deterministic_drift() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let sys = FunctionalSystem::new("one", 1.0, |_, _, _| 1.0, |_, _| 1.0).unwrap();
        let noise = NoiseBundle::from_increments(vec![0.0; 10]);
        let y = simulate_output(&sys, &Path::zeros(g), 4.0, &noise, &g).unwrap();
        approx::assert_abs_diff_eq!(y.value(10), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn r_zero_is_the_pure_diffusion() {
        let g = grid();
        let modulated = FunctionalSystem::new(
            "mod",
            0.25,
            |k, x: &[f64], y: &[f64]| x[k] * (1.0 + 0.5 * y[k].sin()),
            |k, y: &[f64]| 1.0 + 0.5 * y[k].sin(),
        )
        .unwrap();
        let xi_only = FunctionalSystem::new("xi", 0.25, |_, _, _| 123.0, |k, y: &[f64]| 1.0 + 0.5 * y[k].sin()).unwrap();
        let noise = NoiseBundle::generate(&g, 5, 2);
        let x = Path::constant(g, 1.0);
        let y = simulate_output(&modulated, &x, 0.0, &noise, &g).unwrap();
        let xi = simulate_output(&xi_only, &x, 0.0, &noise, &g).unwrap();
        assert_eq!(y, xi);
    }

    #[test]
    fn coupled_ordering_for_nonnegative_additive_drift() {
        let g = grid();
        let sys = FunctionalSystem::awgn();
        let x = Path::new(g, (0..g.len()).map(|k| (k as f64 * 0.3).sin().abs()).collect()).unwrap();
        let noise = NoiseBundle::generate(&g, 3, 9);
        let paths = simulate_coupled(&sys, &x, &[1.0, 4.0], &noise, &g).unwrap();
        for k in 0..g.len() {
            assert!(paths[0].value(k) <= paths[1].value(k));
        }
        let same = simulate_coupled(&sys, &x, &[2.0, 2.0], &noise, &g).unwrap();
        assert_eq!(same[0], same[1]);
        assert!(simulate_coupled(&sys, &x, &[2.0, 1.0], &noise, &g).is_err());
    }

    #[test]
    fn guard_and_blowup_errors() {
        let g = grid();
        let weak = FunctionalSystem::new("weak", 1.0, |_, _, _| 0.0, |_, _| 0.5).unwrap();
        let noise = NoiseBundle::generate(&g, 1, 1);
        assert!(matches!(
            simulate_output(&weak, &Path::zeros(g), 1.0, &noise, &g),
            Err(Error::NonDegeneracyViolation { step: 0, .. })
        ));
        let explosive =
            FunctionalSystem::new("boom", 1.0, |k, _, y: &[f64]| 1e200 * (1.0 + y[k].abs()), |_, _| 1.0).unwrap();
        assert!(matches!(
            simulate_output(&explosive, &Path::zeros(g), 1.0, &noise, &g),
            Err(Error::NonFinite { .. })
        ));
        assert!(simulate_output(&weak, &Path::zeros(g), -1.0, &noise, &g).is_err());
    }

    #[test]
    fn anticipativity_probe() {
        let g = grid();
        let ok = probe_non_anticipativity(&FunctionalSystem::awgn(), &g, 500, 1);
        assert!(ok.passed);
        let n = g.n_steps();
        let peek = FunctionalSystem::new("peek", 1.0, move |_, _, y: &[f64]| y[n], |_, _| 1.0).unwrap();
        let bad = probe_non_anticipativity(&peek, &g, 500, 1);
        assert!(!bad.passed);
        let w = bad.counterexample.unwrap();
        assert_eq!(w.functional, "F");
        assert_ne!(w.first, w.second);
    }
}
