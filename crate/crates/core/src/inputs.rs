//! Input-process models and the fixed catalog of named systems.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classify::SnrClass;
use crate::error::{Error, Result};
use crate::grid::{Path, TimeGrid};
use crate::noise::{stream_rng, StreamDomain};
use crate::system::FunctionalSystem;

const PROB_TOL: f64 = 1e-12;

/// Law of the input process `X`, independent of the channel noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputModel {
    /// `X_t ≡ ξ` with `ξ ~ Normal(0, σ²)`.
    GaussConstant { variance: f64 },
    /// `X_t ≡ ξ` with `ξ` drawn from a finite alphabet.
    FiniteConstant { values: Vec<f64>, probabilities: Vec<f64> },
    /// Symmetric two-state continuous-time Markov chain with switch rate `λ`.
    TelegraphMarkov { states: [f64; 2], rate: f64, initial: [f64; 2] },
}

/// Per-step transition structure of a telegraph input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovHandle {
    pub states: [f64; 2],
    pub transition: [[f64; 2]; 2],
    pub initial: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// Every trajectory with its probability.
    Paths(Vec<(Path, f64)>),
    Markov(MarkovHandle),
    Unsupported,
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    if p.iter().any(|&q| !(q.is_finite() && q >= 0.0)) {
        return Err(Error::InvalidModel("probabilities must be finite and non-negative".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

/// Exact per-step switch probability of the symmetric two-state chain,
/// `(1 − e^{−2λΔ}) / 2`.
pub fn telegraph_switch_probability(rate: f64, dt: f64) -> f64 {
    -0.5 * (-2.0 * rate * dt).exp_m1()
}

impl InputModel {
    pub fn gauss(variance: f64) -> Self {
        Self::GaussConstant { variance }
    }

    pub fn bpsk() -> Self {
        Self::FiniteConstant { values: vec![1.0, -1.0], probabilities: vec![0.5, 0.5] }
    }

    pub fn telegraph(rate: f64) -> Self {
        Self::TelegraphMarkov { states: [1.0, -1.0], rate, initial: [0.5, 0.5] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GaussConstant { variance } => {
                if !(variance.is_finite() && *variance > 0.0) {
                    return Err(Error::InvalidModel(format!("variance must be positive, got {variance}")));
                }
            }
            Self::FiniteConstant { values, probabilities } => {
                if values.is_empty() {
                    return Err(Error::InvalidModel("alphabet is empty".into()));
                }
                if values.len() != probabilities.len() {
                    return Err(Error::InvalidModel("alphabet and probabilities differ in length".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidModel("alphabet values must be finite".into()));
                }
                check_probabilities(probabilities)?;
            }
            Self::TelegraphMarkov { states, rate, initial } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(Error::InvalidModel(format!("switch rate must be non-negative, got {rate}")));
                }
                if states.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidModel("telegraph states must be finite".into()));
                }
                check_probabilities(initial)?;
            }
        }
        Ok(())
    }

    /// Variance of the input value at a fixed time under the prior.
    pub fn prior_variance(&self) -> f64 {
        match self {
            Self::GaussConstant { variance } => *variance,
            Self::FiniteConstant { values, probabilities } => {
                let mean: f64 = values.iter().zip(probabilities).map(|(v, p)| v * p).sum();
                values.iter().zip(probabilities).map(|(v, p)| p * (v - mean).powi(2)).sum()
            }
            Self::TelegraphMarkov { states, initial, .. } => {
                // Symmetric chain: the marginal stays at the initial law only
                // when it is uniform; report the initial variance.
                let mean = states[0] * initial[0] + states[1] * initial[1];
                initial[0] * (states[0] - mean).powi(2) + initial[1] * (states[1] - mean).powi(2)
            }
        }
    }
}

fn draw_index<R: Rng>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left a sliver above the last cumulative sum.
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws one input path, reproducible from `(seed, replicate)`.
pub fn sample_input(model: &InputModel, grid: &TimeGrid, seed: u64, replicate: u64) -> Result<Path> {
    sample_input_in_slot(model, grid, seed, replicate, 0)
}

pub fn sample_input_in_slot(
    model: &InputModel,
    grid: &TimeGrid,
    seed: u64,
    replicate: u64,
    slot: u64,
) -> Result<Path> {
    model.validate()?;
    let mut rng = stream_rng(seed, StreamDomain::Input, replicate, slot);
    let path = match model {
        InputModel::GaussConstant { variance } => {
            let z: f64 = StandardNormal.sample(&mut rng);
            Path::constant(*grid, variance.sqrt() * z)
        }
        InputModel::FiniteConstant { values, probabilities } => {
            Path::constant(*grid, values[draw_index(probabilities, &mut rng)])
        }
        InputModel::TelegraphMarkov { states, rate, initial } => {
            let p_switch = telegraph_switch_probability(*rate, grid.dt());
            let mut state = draw_index(initial, &mut rng);
            let mut values = Vec::with_capacity(grid.len());
            values.push(states[state]);
            for _ in 0..grid.n_steps() {
                if p_switch > 0.0 && rng.random::<f64>() < p_switch {
                    state = 1 - state;
                }
                values.push(states[state]);
            }
            Path::new(*grid, values)?
        }
    };
    Ok(path)
}

/// Enumerable description of the input law on `grid`, when one exists.
pub fn enumerate_support(model: &InputModel, grid: &TimeGrid) -> Support {
    match model {
        InputModel::GaussConstant { .. } => Support::Unsupported,
        InputModel::FiniteConstant { values, probabilities } => Support::Paths(
            values.iter().zip(probabilities).map(|(&v, &p)| (Path::constant(*grid, v), p)).collect(),
        ),
        InputModel::TelegraphMarkov { states, rate, initial } => {
            let p = telegraph_switch_probability(*rate, grid.dt());
            Support::Markov(MarkovHandle {
                states: *states,
                transition: [[1.0 - p, p], [p, 1.0 - p]],
                initial: *initial,
            })
        }
    }
}

/// Whether an independent reference value exists for a catalog system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleAvailability {
    ClosedForm,
    /// Reference obtained by reducing to another catalog system.
    ZEquivalence,
    None,
}

#[derive(Debug, Clone)]
pub struct SystemCatalogEntry {
    pub id: &'static str,
    pub system: FunctionalSystem,
    pub input: InputModel,
    pub expected_class: SnrClass,
    pub oracle: OracleAvailability,
}

/// Parameter overrides for catalog entries. `None` keeps the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogOverrides {
    /// Gaussian input variance (awgn-gauss).
    pub sigma2: Option<f64>,
    /// Output feedback gain (awgn-feedback).
    pub beta: Option<f64>,
    /// Modulation depth, must lie in `[0, 1)` (modulated-bpsk).
    pub gamma: Option<f64>,
    /// Telegraph switch rate (telegraph-awgn).
    pub lambda: Option<f64>,
    /// `(value, probability)` pairs for finite-alphabet inputs; for the
    /// telegraph entry exactly two values with their initial probabilities.
    pub alphabet: Option<Vec<(f64, f64)>>,
}

pub const CATALOG_IDS: [&str; 6] =
    ["awgn-gauss", "awgn-bpsk", "telegraph-awgn", "awgn-feedback", "modulated-bpsk", "shifted-positive"];

pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_LAMBDA: f64 = 1.0;

fn finite_from(alphabet: &Option<Vec<(f64, f64)>>, default: InputModel) -> InputModel {
    match alphabet {
        Some(pairs) => InputModel::FiniteConstant {
            values: pairs.iter().map(|p| p.0).collect(),
            probabilities: pairs.iter().map(|p| p.1).collect(),
        },
        None => default,
    }
}

/// Feedback channel `F = x(t_k) − β·y(t_k)`, `G ≡ 1`.
pub fn feedback_system(beta: f64) -> FunctionalSystem {
    FunctionalSystem::new("awgn-feedback", 1.0, move |k, x: &[f64], y: &[f64]| x[k] - beta * y[k], |_, _| 1.0)
        .expect("unit diffusion satisfies any bound <= 1")
}

/// Modulated channel `F = x(t_k)·m`, `G = m` with `m = 1 + γ·sin y(t_k)`.
pub fn modulated_system(gamma: f64) -> Result<FunctionalSystem> {
    if !(gamma.is_finite() && (0.0..1.0).contains(&gamma)) {
        return Err(Error::InvalidModel(format!("modulation depth must lie in [0, 1), got {gamma}")));
    }
    let k_bound = (1.0 - gamma) * (1.0 - gamma);
    FunctionalSystem::new(
        "modulated-bpsk",
        k_bound,
        move |k, x: &[f64], y: &[f64]| x[k] * (1.0 + gamma * y[k].sin()),
        move |k, y: &[f64]| 1.0 + gamma * y[k].sin(),
    )
}

/// Looks up one catalog entry with overrides applied.
pub fn catalog_entry(id: &str, overrides: &CatalogOverrides) -> Result<SystemCatalogEntry> {
    let entry = match id {
        "awgn-gauss" => SystemCatalogEntry {
            id: "awgn-gauss",
            system: FunctionalSystem::awgn().with_name("awgn-gauss"),
            input: InputModel::gauss(overrides.sigma2.unwrap_or(1.0)),
            expected_class: SnrClass::StrongSnr,
            oracle: OracleAvailability::ClosedForm,
        },
        "awgn-bpsk" => SystemCatalogEntry {
            id: "awgn-bpsk",
            system: FunctionalSystem::awgn().with_name("awgn-bpsk"),
            input: finite_from(&overrides.alphabet, InputModel::bpsk()),
            expected_class: SnrClass::StrongSnr,
            oracle: OracleAvailability::ClosedForm,
        },
        "telegraph-awgn" => {
            let rate = overrides.lambda.unwrap_or(DEFAULT_LAMBDA);
            let input = match &overrides.alphabet {
                Some(pairs) if pairs.len() == 2 => InputModel::TelegraphMarkov {
                    states: [pairs[0].0, pairs[1].0],
                    rate,
                    initial: [pairs[0].1, pairs[1].1],
                },
                Some(_) => return Err(Error::InvalidModel("telegraph alphabet must have exactly two states".into())),
                None => InputModel::telegraph(rate),
            };
            SystemCatalogEntry {
                id: "telegraph-awgn",
                system: FunctionalSystem::awgn().with_name("telegraph-awgn"),
                input,
                expected_class: SnrClass::StrongSnr,
                oracle: OracleAvailability::None,
            }
        }
        "awgn-feedback" => {
            let beta = overrides.beta.unwrap_or(DEFAULT_BETA);
            if !beta.is_finite() {
                return Err(Error::InvalidModel("feedback gain must be finite".into()));
            }
            SystemCatalogEntry {
                id: "awgn-feedback",
                system: feedback_system(beta),
                input: finite_from(&overrides.alphabet, InputModel::bpsk()),
                expected_class: SnrClass::General,
                oracle: OracleAvailability::None,
            }
        }
        "modulated-bpsk" => SystemCatalogEntry {
            id: "modulated-bpsk",
            system: modulated_system(overrides.gamma.unwrap_or(DEFAULT_GAMMA))?,
            input: finite_from(&overrides.alphabet, InputModel::bpsk()),
            expected_class: SnrClass::StrongSnr,
            oracle: OracleAvailability::ZEquivalence,
        },
        "shifted-positive" => SystemCatalogEntry {
            id: "shifted-positive",
            system: FunctionalSystem::awgn().with_name("shifted-positive"),
            input: finite_from(
                &overrides.alphabet,
                InputModel::FiniteConstant { values: vec![0.5, 1.5], probabilities: vec![0.5, 0.5] },
            ),
            expected_class: SnrClass::StrongSnr,
            oracle: OracleAvailability::ClosedForm,
        },
        other => return Err(Error::InvalidModel(format!("unknown catalog id '{other}'"))),
    };
    entry.input.validate()?;
    Ok(entry)
}

/// The six catalog systems with default parameters.
pub fn catalog() -> Vec<SystemCatalogEntry> {
    CATALOG_IDS
        .iter()
        .map(|id| catalog_entry(id, &CatalogOverrides::default()).expect("defaults are valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 200).unwrap()
    }

    #[test]
    fn catalog_has_six_unique_ids() {
        let cat = catalog();
        assert_eq!(cat.len(), 6);
        let ids: HashSet<_> = cat.iter().map(|e| e.id).collect();
        assert_eq!(ids.len(), 6);
    }

    #[test]
    fn awgn_gauss_entry_is_unit_diffusion() {
        let e = catalog_entry("awgn-gauss", &CatalogOverrides::default()).unwrap();
        assert_eq!(e.system.nondegeneracy_k(), 1.0);
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 - 3.0).collect();
        for k in 0..10 {
            assert_eq!(e.system.diffusion(k, &y).unwrap(), 1.0);
        }
    }

    #[test]
    fn modulated_diffusion_respects_bound() {
        let e = catalog_entry("modulated-bpsk", &CatalogOverrides::default()).unwrap();
        assert_eq!(e.system.nondegeneracy_k(), 0.25);
        for i in 0..10_000 {
            let y = [i as f64 * 0.013 - 60.0];
            let g = e.system.diffusion(0, &y).unwrap();
            assert!((0.5..=1.5).contains(&g));
        }
        assert!(modulated_system(1.0).is_err());
    }

    #[test]
    fn finite_paths_are_constant() {
        let g = grid();
        for rep in 0..50 {
            let p = sample_input(&InputModel::bpsk(), &g, 1, rep).unwrap();
            let v = p.value(0);
            assert!(v == 1.0 || v == -1.0);
            assert!(p.values().iter().all(|&u| u == v));
        }
    }

    #[test]
    fn zero_rate_telegraph_never_switches() {
        let g = grid();
        for rep in 0..50 {
            let p = sample_input(&InputModel::telegraph(0.0), &g, 2, rep).unwrap();
            assert!(p.values().iter().all(|&u| u == p.value(0)));
        }
    }

    #[test]
    fn invalid_models() {
        let g = grid();
        assert!(sample_input(&InputModel::gauss(0.0), &g, 0, 0).is_err());
        assert!(sample_input(&InputModel::telegraph(-1.0), &g, 0, 0).is_err());
        let empty = InputModel::FiniteConstant { values: vec![], probabilities: vec![] };
        assert!(sample_input(&empty, &g, 0, 0).is_err());
        let unnormalized = InputModel::FiniteConstant { values: vec![1.0, 2.0], probabilities: vec![0.5, 0.6] };
        assert!(unnormalized.validate().is_err());
    }

    #[test]
    fn support_enumeration() {
        let g = grid();
        match enumerate_support(&InputModel::bpsk(), &g) {
            Support::Paths(paths) => {
                assert_eq!(paths.len(), 2);
                assert_eq!(paths.iter().map(|p| p.1).sum::<f64>(), 1.0);
                assert!(paths.iter().all(|p| p.1 == 0.5));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(enumerate_support(&InputModel::gauss(1.0), &g), Support::Unsupported);
        match enumerate_support(&InputModel::telegraph(1.0), &g) {
            Support::Markov(h) => {
                for row in h.transition {
                    assert!((row[0] + row[1] - 1.0).abs() < 1e-15);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn finite_sampler_frequencies() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let m = InputModel::FiniteConstant { values: vec![0.0, 1.0, 2.0], probabilities: vec![0.25, 0.5, 0.25] };
        let n = 100_000u64;
        let mut counts = [0u64; 3];
        for rep in 0..n {
            counts[sample_input(&m, &g, 9, rep).unwrap().value(0) as usize] += 1;
        }
        for (c, p) in counts.iter().zip([0.25, 0.5, 0.25]) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 3.0 * se, "count {c} vs p {p}");
        }
    }
}
