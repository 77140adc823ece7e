//! SNR-class probes and the Z-transform of the output.
//!
//! Every verdict here comes from sampled probes. A system that passes was not
//! caught depending on the output; that is evidence, not proof.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Path, TimeGrid};
use crate::inputs::{sample_input_in_slot, InputModel};
use crate::noise::{stream_rng, NoiseBundle, StreamDomain};
use crate::probe;
use crate::simulate::{probe_non_anticipativity, simulate_output};
use crate::system::FunctionalSystem;

/// Probes per mode when no budget is given.
pub const DEFAULT_PROBE_BUDGET: usize = 1000;

/// `(r₁, r₂)` pairs used for the coupled monotonicity probe.
pub const DEFAULT_R_PAIRS: [(f64, f64); 3] = [(0.5, 1.0), (1.0, 2.0), (2.0, 4.0)];

const REL_TOL: f64 = 1e-12;

/// SNR classes, ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SnrClass {
    General,
    QuasiSnr,
    Snr,
    StrongSnr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    /// `φ(k, f, g₁) = φ(k, f, g₂)`.
    Value,
    /// `φ²(k, f, g₁) = φ²(k, f, g₂)`.
    Square,
}

/// First counterexample found by a probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeWitness {
    pub step: usize,
    pub first: f64,
    pub second: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    pub passed: bool,
    pub witness: Option<ProbeWitness>,
}

/// Outcome of the coupled monotonicity probe, with the two orderings counted
/// separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingRecord {
    pub pairs: Vec<(f64, f64)>,
    pub replicates: usize,
    /// Replicates skipped because simulation failed at one of the two `r`.
    pub aborted: usize,
    /// Replicate-pairs where `y^{r₁}(t_k) > y^{r₂}(t_k)` for some `k`.
    pub output_violations: usize,
    /// Replicate-pairs where `r₁φ²(·, X, Y^{r₁}) > r₂φ²(·, X, Y^{r₂})` for some `k`.
    pub phi_violations: usize,
    pub witness: Option<ProbeWitness>,
}

impl CouplingRecord {
    /// Only the `r·φ²` ordering decides the probe; output ordering is reported.
    pub fn passed(&self) -> bool {
        self.phi_violations == 0
    }

    pub fn to_probe_record(&self) -> ProbeRecord {
        ProbeRecord {
            name: "coupled_monotonicity".into(),
            samples: self.replicates * self.pairs.len(),
            violations: self.phi_violations,
            passed: self.passed(),
            witness: self.witness.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrClassReport {
    pub verdict: SnrClass,
    pub evidence: Vec<ProbeRecord>,
    /// Always true: the verdict is drawn from finitely many sampled probes.
    pub probabilistic: bool,
    pub caveat: String,
}

/// Output path with increments `Δz_k = Δy_k / G(k, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZPath {
    path: Path,
    increments: Vec<f64>,
}

impl ZPath {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn into_path(self) -> Path {
        self.path
    }
}

fn close(a: f64, b: f64) -> bool {
    if a.to_bits() == b.to_bits() {
        return true;
    }
    (a - b).abs() <= REL_TOL * a.abs().max(1.0)
}

/// Samples `(k, f, g₁, g₂)` with `g₁ ≠ g₂` up to `t_k` and compares `φ` (or
/// `|φ|`, which is equivalent to comparing `φ²`).
///
/// The comparison allows a relative slack of `1e-12` because a drift and a
/// diffusion that cancel algebraically do not cancel bit-exactly in floating
/// point.
pub fn probe_phi_independence(
    system: &FunctionalSystem,
    grid: &TimeGrid,
    n_probes: usize,
    seed: u64,
    mode: ProbeMode,
) -> ProbeRecord {
    let mut rng = stream_rng(seed, StreamDomain::Probe, 0, 0x7068_6931);
    let mut violations = 0;
    let mut witness = None;
    for _ in 0..n_probes {
        let k = rng.random_range(0..=grid.n_steps());
        let f = probe::random_input(grid, &mut rng);
        let g1 = probe::random_output(grid, &mut rng);
        let g2 = probe::perturb_output(grid, &g1, k, &mut rng);
        let a = system.phi_raw(k, &f, &g1);
        let b = system.phi_raw(k, &f, &g2);
        let same = match mode {
            ProbeMode::Value => close(a, b),
            ProbeMode::Square => close(a.abs(), b.abs()),
        };
        if !same {
            violations += 1;
            if witness.is_none() {
                witness = Some(ProbeWitness {
                    step: k,
                    first: a,
                    second: b,
                    note: format!("phi differs between two output paths at y(t_k) = {} vs {}", g1[k], g2[k]),
                });
            }
        }
    }
    let name = match mode {
        ProbeMode::Value => "phi_independence_value",
        ProbeMode::Square => "phi_independence_square",
    };
    ProbeRecord { name: name.into(), samples: n_probes, violations, passed: violations == 0, witness }
}

/// Simulates `Y^{r₁}` and `Y^{r₂}` from one `(X, W)` draw per replicate and
/// checks the two pathwise orderings at every grid index.
pub fn coupled_monotonicity_test(
    system: &FunctionalSystem,
    input: &InputModel,
    r_pairs: &[(f64, f64)],
    replicates: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<CouplingRecord> {
    input.validate()?;
    let mut record = CouplingRecord {
        pairs: r_pairs.to_vec(),
        replicates,
        aborted: 0,
        output_violations: 0,
        phi_violations: 0,
        witness: None,
    };
    for rep in 0..replicates as u64 {
        let x = sample_input_in_slot(input, grid, seed, rep, 0x6d6f_6e6f)?;
        let noise = NoiseBundle::generate_in_slot(grid, seed, rep, 0x6d6f_6e6f);
        for &(r1, r2) in r_pairs {
            let (y1, y2) = match (simulate_output(system, &x, r1, &noise, grid), simulate_output(system, &x, r2, &noise, grid)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    record.aborted += 1;
                    continue;
                }
            };
            let (y1, y2) = (y1.values(), y2.values());
            if y1.iter().zip(y2).any(|(a, b)| *a > *b && !close(*a, *b)) {
                record.output_violations += 1;
            }
            let bad = (0..grid.len()).find_map(|k| {
                let p1 = r1 * system.phi_raw(k, x.values(), y1).powi(2);
                let p2 = r2 * system.phi_raw(k, x.values(), y2).powi(2);
                (p1 > p2 && !close(p1, p2)).then_some((k, p1, p2))
            });
            if let Some((k, p1, p2)) = bad {
                record.phi_violations += 1;
                if record.witness.is_none() {
                    record.witness = Some(ProbeWitness {
                        step: k,
                        first: p1,
                        second: p2,
                        note: format!("r*phi^2 decreased from r = {r1} to r = {r2} on replicate {rep}"),
                    });
                }
            }
        }
    }
    Ok(record)
}

/// [`classify_system_with_budget`] at the default probe budget.
pub fn classify_system(system: &FunctionalSystem, input: &InputModel, grid: &TimeGrid, seed: u64) -> Result<SnrClassReport> {
    classify_system_with_budget(system, input, grid, seed, DEFAULT_PROBE_BUDGET)
}

/// Runs the probes strongest-first and stops at the first class that passes.
pub fn classify_system_with_budget(
    system: &FunctionalSystem,
    input: &InputModel,
    grid: &TimeGrid,
    seed: u64,
    budget: usize,
) -> Result<SnrClassReport> {
    let anticipation = probe_non_anticipativity(system, grid, budget, seed);
    let mut evidence = vec![ProbeRecord {
        name: "non_anticipativity".into(),
        samples: anticipation.probes,
        violations: usize::from(!anticipation.passed),
        passed: anticipation.passed,
        witness: anticipation.counterexample.map(|w| ProbeWitness {
            step: w.step,
            first: w.first,
            second: w.second,
            note: format!("{} depends on the path after t_k", w.functional),
        }),
    }];
    let report = |verdict, evidence| SnrClassReport {
        verdict,
        evidence,
        probabilistic: true,
        caveat: format!(
            "verdict from {budget} sampled probes per test; absence of counterexamples does not prove the class"
        ),
    };

    let value = probe_phi_independence(system, grid, budget, seed, ProbeMode::Value);
    let passed = value.passed;
    evidence.push(value);
    if passed {
        return Ok(report(SnrClass::StrongSnr, evidence));
    }
    let square = probe_phi_independence(system, grid, budget, seed, ProbeMode::Square);
    let passed = square.passed;
    evidence.push(square);
    if passed {
        return Ok(report(SnrClass::Snr, evidence));
    }
    let coupling = coupled_monotonicity_test(system, input, &DEFAULT_R_PAIRS, budget, grid, seed)?;
    let passed = coupling.passed();
    evidence.push(coupling.to_probe_record());
    Ok(report(if passed { SnrClass::QuasiSnr } else { SnrClass::General }, evidence))
}

/// `Δz_k = Δy_k / G(k, y)`, `z_0 = 0`.
pub fn z_transform(system: &FunctionalSystem, y: &Path) -> Result<ZPath> {
    let yv = y.values();
    let mut increments = Vec::with_capacity(yv.len() - 1);
    for k in 0..yv.len() - 1 {
        let g = system.diffusion(k, yv)?;
        increments.push((yv[k + 1] - yv[k]) / g);
    }
    let path = Path::from_increments(y.grid(), &increments)?;
    Ok(ZPath { path, increments })
}

/// Rebuilds `y` from `z` with `y_{k+1} = y_k + G(k, y)·Δz_k`.
pub fn z_inverse(system: &FunctionalSystem, z: &ZPath) -> Result<Path> {
    let grid = z.path.grid();
    let mut y = vec![0.0; grid.len()];
    for (k, dz) in z.increments.iter().enumerate() {
        let g = system.diffusion(k, &y)?;
        y[k + 1] = y[k] + g * dz;
    }
    Path::new(grid, y)
}
