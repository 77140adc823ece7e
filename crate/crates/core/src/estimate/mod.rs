//! Exact conditional expectations on the Euler–Maruyama model.
//!
//! Everything here conditions on the discretized output: finite alphabets by
//! enumeration, telegraph inputs by the forward-backward recursions and
//! Gaussian constant inputs on the additive channel by conjugacy. No particle
//! approximation is involved, so the only randomness left in an ensemble is the
//! outer Monte Carlo draw of `(X, W)`.

mod kl;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Path;
use crate::inputs::{enumerate_support, InputModel, MarkovHandle, Support};
use crate::system::FunctionalSystem;

pub(crate) use kl::{kl_gaussian, kl_to_mixture};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `φ(t_k, x, y) = F / G` at one grid index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiValue(pub f64);

/// Which σ-algebra a posterior conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditioningMode {
    /// Entry `k` conditions on the output up to `t_k`.
    Causal,
    /// Every entry conditions on the output up to `t_window`.
    Smoothed { window: usize },
}

/// Conditional law of the input given the output.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorLaw {
    /// `weights[j][c]`: probability of alphabet value `c` at index `j`.
    Finite { values: Vec<f64>, weights: Vec<Vec<f64>> },
    /// `probs[j][i]`: probability of telegraph state `i` at index `j`.
    Markov { states: [f64; 2], probs: Vec<[f64; 2]> },
    /// Conjugate normal posterior of the constant input at index `j`.
    Gauss { mean: Vec<f64>, variance: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub mode: ConditioningMode,
    pub law: PosteriorLaw,
}

impl PosteriorState {
    /// Number of indices covered (`N + 1` causal, `window + 1` smoothed).
    pub fn len(&self) -> usize {
        match &self.law {
            PosteriorLaw::Finite { weights, .. } => weights.len(),
            PosteriorLaw::Markov { probs, .. } => probs.len(),
            PosteriorLaw::Gauss { mean, .. } => mean.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Posterior mean of the input value at index `j`.
    pub fn input_mean(&self, j: usize) -> f64 {
        match &self.law {
            PosteriorLaw::Finite { values, weights } => values.iter().zip(&weights[j]).map(|(v, w)| v * w).sum(),
            PosteriorLaw::Markov { states, probs } => states[0] * probs[j][0] + states[1] * probs[j][1],
            PosteriorLaw::Gauss { mean, .. } => mean[j],
        }
    }

    /// Posterior probabilities at index `j`; `None` for the Gaussian law.
    pub fn distribution(&self, j: usize) -> Option<Vec<f64>> {
        match &self.law {
            PosteriorLaw::Finite { weights, .. } => Some(weights[j].clone()),
            PosteriorLaw::Markov { probs, .. } => Some(probs[j].to_vec()),
            PosteriorLaw::Gauss { .. } => None,
        }
    }
}

#[inline]
fn log_normal_density(z: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - (z - mean) * (z - mean) / (2.0 * var)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights in place into probabilities; returns the log-normalizer.
fn normalize_log(weights: &mut [f64]) -> f64 {
    let lz = log_sum_exp(weights);
    for w in weights.iter_mut() {
        *w = (*w - lz).exp();
    }
    lz
}

pub fn eval_phi(system: &FunctionalSystem, k: usize, x: &Path, y: &Path) -> Result<PhiValue> {
    let g = system.diffusion(k, y.values())?;
    Ok(PhiValue(system.drift(k, x.values(), y.values()) / g))
}

/// Log-density of the discretized transitions of `y` given input `x`,
/// restricted to the first `steps` increments.
pub fn path_loglik_prefix(system: &FunctionalSystem, x: &Path, y: &Path, r: f64, steps: usize) -> Result<f64> {
    let grid = y.grid();
    x.check_grid(&grid)?;
    if steps > grid.n_steps() {
        return Err(Error::InvalidSpec(format!("prefix of {steps} steps exceeds grid")));
    }
    let dt = grid.dt();
    let sqrt_r = r.sqrt();
    let (xv, yv) = (x.values(), y.values());
    let mut total = 0.0;
    for j in 0..steps {
        let g = system.diffusion(j, yv)?;
        let mean = if sqrt_r == 0.0 { 0.0 } else { sqrt_r * system.drift(j, xv, yv) * dt };
        total += log_normal_density(yv[j + 1] - yv[j], mean, g * g * dt);
    }
    Ok(total)
}

/// `Σ_k log Normal(Δy_k; √r·F(k, x, y)·Δ, G²(k, y)·Δ)`.
pub fn path_loglik(system: &FunctionalSystem, x: &Path, y: &Path, r: f64) -> Result<f64> {
    path_loglik_prefix(system, x, y, r, y.grid().n_steps())
}

/// Per-candidate emission quantities for one realized output path.
pub(crate) struct EmissionTable {
    n_cand: usize,
    /// `[j][c]`: log-density of `Δy_j` under candidate `c`.
    log_e: Vec<f64>,
    /// `[j][c]`: increment mean `√r·F(j, c, y)·Δ`.
    mean: Vec<f64>,
    /// `[k][c]`: `φ(k, c, y)` for `k = 0..=N`.
    phi: Vec<f64>,
    /// `G²(j, y)·Δ` for `j < N`.
    var: Vec<f64>,
}

impl EmissionTable {
    fn build(system: &FunctionalSystem, candidates: &[f64], y: &Path, r: f64) -> Result<Self> {
        let grid = y.grid();
        let n = grid.n_steps();
        let dt = grid.dt();
        let sqrt_r = r.sqrt();
        let yv = y.values();
        let nc = candidates.len();
        let cand_paths: Vec<Vec<f64>> = candidates.iter().map(|&v| vec![v; n + 1]).collect();
        let mut log_e = Vec::with_capacity(n * nc);
        let mut mean = Vec::with_capacity(n * nc);
        let mut phi = Vec::with_capacity((n + 1) * nc);
        let mut var = Vec::with_capacity(n);
        for k in 0..=n {
            let g = system.diffusion(k, yv)?;
            let v = g * g * dt;
            if k < n {
                var.push(v);
            }
            for cp in &cand_paths {
                let f = system.drift(k, cp, yv);
                phi.push(f / g);
                if k < n {
                    let m = sqrt_r * f * dt;
                    mean.push(m);
                    log_e.push(log_normal_density(yv[k + 1] - yv[k], m, v));
                }
            }
        }
        Ok(Self { n_cand: nc, log_e, mean, phi, var })
    }

    #[inline]
    fn log_e(&self, j: usize) -> &[f64] {
        &self.log_e[j * self.n_cand..(j + 1) * self.n_cand]
    }

    #[inline]
    fn mean(&self, j: usize) -> &[f64] {
        &self.mean[j * self.n_cand..(j + 1) * self.n_cand]
    }

    #[inline]
    fn phi(&self, k: usize) -> &[f64] {
        &self.phi[k * self.n_cand..(k + 1) * self.n_cand]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Posterior moments of `φ` over one conditioning window.
#[derive(Debug, Clone, Default)]
pub(crate) struct WindowMoments {
    /// `E[φ(j, X, Y) | F_{t_window}]`, `j = 0..=window`.
    pub phi_mean: Vec<f64>,
    /// `Var[φ(j, X, Y) | F_{t_window}]`, `j = 0..=window`.
    pub phi_var: Vec<f64>,
    /// `E[log_rn(t_window) | F_{t_window}]`.
    pub expected_log_rn: f64,
}

/// Filtering state for one `(input law, output path, r)` triple, shared by
/// every estimator that needs it.
pub(crate) enum Engine {
    Finite {
        values: Vec<f64>,
        table: EmissionTable,
        /// `[k][c]` causal weights, `k = 0..=N`.
        weights: Vec<Vec<f64>>,
        /// `[k][c]`: `log p(Δy_{<k} | c)`.
        loglik: Vec<Vec<f64>>,
        /// `log p(Δy_{<k})`.
        log_marginal: Vec<f64>,
        r: f64,
    },
    Markov {
        handle: MarkovHandle,
        table: EmissionTable,
        /// `P(s_k | Δy_{<k})`.
        filtered: Vec<[f64; 2]>,
        log_marginal: Vec<f64>,
        r: f64,
    },
    Gauss {
        variance: f64,
        r: f64,
        y: Vec<f64>,
        times: Vec<f64>,
        dt: f64,
        mean: Vec<f64>,
        post_var: Vec<f64>,
    },
}

fn mean_var(probs: &[f64], phi: &[f64]) -> (f64, f64) {
    let mut m = 0.0;
    let mut m2 = 0.0;
    for (p, f) in probs.iter().zip(phi) {
        if *p > 0.0 {
            m += p * f;
            m2 += p * f * f;
        }
    }
    (m, (m2 - m * m).max(0.0))
}

impl Engine {
    pub(crate) fn build(system: &FunctionalSystem, input: &InputModel, y: &Path, r: f64) -> Result<Self> {
        input.validate()?;
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidSpec(format!("r must be non-negative, got {r}")));
        }
        let grid = y.grid();
        let n = grid.n_steps();
        match enumerate_support(input, &grid) {
            Support::Paths(_) => {
                let InputModel::FiniteConstant { values, probabilities } = input else { unreachable!() };
                let table = EmissionTable::build(system, values, y, r)?;
                let log_prior: Vec<f64> = probabilities.iter().map(|p| p.ln()).collect();
                let mut cum = vec![0.0; values.len()];
                let mut weights = Vec::with_capacity(n + 1);
                let mut loglik = Vec::with_capacity(n + 1);
                let mut log_marginal = Vec::with_capacity(n + 1);
                for k in 0..=n {
                    if k > 0 {
                        for (c, le) in cum.iter_mut().zip(table.log_e(k - 1)) {
                            *c += le;
                        }
                    }
                    let mut w: Vec<f64> = cum.iter().zip(&log_prior).map(|(a, b)| a + b).collect();
                    log_marginal.push(normalize_log(&mut w));
                    weights.push(w);
                    loglik.push(cum.clone());
                }
                Ok(Self::Finite { values: values.clone(), table, weights, loglik, log_marginal, r })
            }
            Support::Markov(handle) => {
                let table = EmissionTable::build(system, &handle.states, y, r)?;
                let p = handle.transition;
                let mut filtered = Vec::with_capacity(n + 1);
                let mut log_marginal = Vec::with_capacity(n + 1);
                let mut cur = handle.initial;
                let mut acc = 0.0;
                filtered.push(cur);
                log_marginal.push(0.0);
                for j in 0..n {
                    let le = table.log_e(j);
                    let mut a = [cur[0].ln() + le[0], cur[1].ln() + le[1]];
                    acc += normalize_log(&mut a);
                    cur = [a[0] * p[0][0] + a[1] * p[1][0], a[0] * p[0][1] + a[1] * p[1][1]];
                    let s = cur[0] + cur[1];
                    cur = [cur[0] / s, cur[1] / s];
                    filtered.push(cur);
                    log_marginal.push(acc);
                }
                Ok(Self::Markov { handle, table, filtered, log_marginal, r })
            }
            Support::Unsupported => {
                let InputModel::GaussConstant { variance } = input else { unreachable!() };
                if !system.is_additive_awgn() {
                    return Err(Error::UnsupportedInput(
                        "Gaussian inputs are supported only on the additive channel F = x(t), G = 1".into(),
                    ));
                }
                let times = grid.times();
                let yv = y.values().to_vec();
                let sr = r.sqrt();
                let mut mean = Vec::with_capacity(n + 1);
                let mut post_var = Vec::with_capacity(n + 1);
                for (t, yk) in times.iter().zip(&yv) {
                    let denom = 1.0 + r * variance * t;
                    mean.push(sr * variance * yk / denom);
                    post_var.push(variance / denom);
                }
                Ok(Self::Gauss { variance: *variance, r, y: yv, times, dt: grid.dt(), mean, post_var })
            }
        }
    }

    pub(crate) fn n_steps(&self) -> usize {
        match self {
            Self::Finite { weights, .. } => weights.len() - 1,
            Self::Markov { filtered, .. } => filtered.len() - 1,
            Self::Gauss { mean, .. } => mean.len() - 1,
        }
    }

    /// Smoothed distributions `P(s_j | Δy_{<window})`, `j = 0..=window`.
    fn markov_smoothed(handle: &MarkovHandle, table: &EmissionTable, filtered: &[[f64; 2]], window: usize) -> Vec<[f64; 2]> {
        let p = handle.transition;
        let mut out = vec![[0.0; 2]; window + 1];
        out[window] = filtered[window];
        let mut beta = [1.0, 1.0];
        for j in (0..window).rev() {
            let le = table.log_e(j);
            let m = le[0].max(le[1]);
            let b = [p[0][0] * beta[0] + p[0][1] * beta[1], p[1][0] * beta[0] + p[1][1] * beta[1]];
            let nb = [(le[0] - m).exp() * b[0], (le[1] - m).exp() * b[1]];
            let s = nb[0] + nb[1];
            beta = [nb[0] / s, nb[1] / s];
            let q = [filtered[j][0] * beta[0], filtered[j][1] * beta[1]];
            let z = q[0] + q[1];
            out[j] = [q[0] / z, q[1] / z];
        }
        out
    }

    /// Posterior moments of `φ` at every index up to `window`, conditioned on
    /// the output up to `t_window`. The entry at `j = window` is the causal one.
    pub(crate) fn window_moments(&self, window: usize, out: &mut WindowMoments) {
        out.phi_mean.clear();
        out.phi_var.clear();
        match self {
            Self::Finite { weights, table, loglik, log_marginal, r, .. } => {
                let w = &weights[window];
                for j in 0..=window {
                    let (m, v) = mean_var(w, table.phi(j));
                    out.phi_mean.push(m);
                    out.phi_var.push(v);
                }
                out.expected_log_rn = if *r == 0.0 || window == 0 {
                    0.0
                } else {
                    let e: f64 = w.iter().zip(&loglik[window]).filter(|(p, _)| **p > 0.0).map(|(p, l)| p * l).sum();
                    e - log_marginal[window]
                };
            }
            Self::Markov { handle, table, filtered, log_marginal, r } => {
                let sm = Self::markov_smoothed(handle, table, filtered, window);
                for (j, d) in sm.iter().enumerate() {
                    let (m, v) = mean_var(d, table.phi(j));
                    out.phi_mean.push(m);
                    out.phi_var.push(v);
                }
                out.expected_log_rn = if *r == 0.0 || window == 0 {
                    0.0
                } else {
                    let e: f64 = (0..window).map(|j| dot(&sm[j], table.log_e(j))).sum();
                    e - log_marginal[window]
                };
            }
            Self::Gauss { variance, r, y, times, mean, post_var, .. } => {
                out.phi_mean.extend(std::iter::repeat_n(mean[window], window + 1));
                out.phi_var.extend(std::iter::repeat_n(post_var[window], window + 1));
                let t = times[window];
                out.expected_log_rn = if *r == 0.0 || window == 0 {
                    0.0
                } else {
                    log_normal_density(y[window], r.sqrt() * mean[window] * t, t) - 0.5 * r * post_var[window] * t
                        - log_normal_density(y[window], 0.0, t + r * variance * t * t)
                };
            }
        }
    }

    /// `log p(Δy_{<k} | x) − log p(Δy_{<k})` for `k = 0..=N`.
    pub(crate) fn log_rn_series(&self, system: &FunctionalSystem, x: &Path, y: &Path, r: f64) -> Result<Vec<f64>> {
        let n = self.n_steps();
        match self {
            Self::Gauss { variance, r, y, times, .. } => {
                let sr = r.sqrt();
                let xv = x.value(0);
                Ok((0..=n)
                    .map(|k| {
                        let t = times[k];
                        if k == 0 || *r == 0.0 {
                            0.0
                        } else {
                            log_normal_density(y[k], sr * xv * t, t)
                                - log_normal_density(y[k], 0.0, t + r * variance * t * t)
                        }
                    })
                    .collect())
            }
            Self::Finite { log_marginal, .. } | Self::Markov { log_marginal, .. } => {
                let grid = y.grid();
                x.check_grid(&grid)?;
                let dt = grid.dt();
                let sqrt_r = r.sqrt();
                let (xv, yv) = (x.values(), y.values());
                let mut out = Vec::with_capacity(n + 1);
                let mut cond = 0.0;
                out.push(0.0);
                for j in 0..n {
                    let g = system.diffusion(j, yv)?;
                    let m = if sqrt_r == 0.0 { 0.0 } else { sqrt_r * system.drift(j, xv, yv) * dt };
                    cond += log_normal_density(yv[j + 1] - yv[j], m, g * g * dt);
                    out.push(cond - (log_marginal[j + 1] - log_marginal[0]));
                }
                if r == 0.0 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                }
                Ok(out)
            }
        }
    }

    /// Expected one-step log-RN increments, `j = 0..N−1`: the divergence
    /// between the transition law of `Δy_j` given the input and given the
    /// output past, averaged over the input's posterior given the whole output.
    pub(crate) fn expected_kl_increments(&self) -> Vec<f64> {
        let n = self.n_steps();
        match self {
            Self::Gauss { r, dt, mean, post_var, .. } => {
                let (mt, vt) = (mean[n], post_var[n]);
                (0..n)
                    .map(|j| {
                        let pred = dt + r * post_var[j] * dt * dt;
                        let sr = r.sqrt();
                        kl_gaussian(sr * mt * dt, *dt, sr * mean[j] * dt, pred) + 0.5 * r * dt * dt * vt / pred
                    })
                    .collect()
            }
            Self::Finite { table, weights, .. } => {
                let wt = &weights[n];
                (0..n)
                    .map(|j| {
                        let means = table.mean(j);
                        wt.iter()
                            .zip(means)
                            .filter(|(p, _)| **p > 0.0)
                            .map(|(p, &m)| p * kl_to_mixture(m, means, &weights[j], table.var[j]))
                            .sum()
                    })
                    .collect()
            }
            Self::Markov { handle, table, filtered, .. } => {
                let sm = Self::markov_smoothed(handle, table, filtered, n);
                (0..n)
                    .map(|j| {
                        let means = table.mean(j);
                        (0..2)
                            .filter(|&s| sm[j][s] > 0.0)
                            .map(|s| sm[j][s] * kl_to_mixture(means[s], means, &filtered[j], table.var[j]))
                            .sum()
                    })
                    .collect()
            }
        }
    }

    fn causal_law(&self) -> PosteriorLaw {
        match self {
            Self::Finite { values, weights, .. } => PosteriorLaw::Finite { values: values.clone(), weights: weights.clone() },
            Self::Markov { handle, filtered, .. } => PosteriorLaw::Markov { states: handle.states, probs: filtered.clone() },
            Self::Gauss { mean, post_var, .. } => PosteriorLaw::Gauss { mean: mean.clone(), variance: post_var.clone() },
        }
    }

    fn smoothed_law(&self, window: usize) -> PosteriorLaw {
        match self {
            Self::Finite { values, weights, .. } => {
                PosteriorLaw::Finite { values: values.clone(), weights: vec![weights[window].clone(); window + 1] }
            }
            Self::Markov { handle, table, filtered, .. } => PosteriorLaw::Markov {
                states: handle.states,
                probs: Self::markov_smoothed(handle, table, filtered, window),
            },
            Self::Gauss { mean, post_var, .. } => PosteriorLaw::Gauss {
                mean: vec![mean[window]; window + 1],
                variance: vec![post_var[window]; window + 1],
            },
        }
    }
}

/// Filtering distributions `P(X | F_{t_k})` at every grid index.
pub fn causal_posterior(system: &FunctionalSystem, input: &InputModel, y: &Path, r: f64) -> Result<PosteriorState> {
    let engine = Engine::build(system, input, y, r)?;
    Ok(PosteriorState { mode: ConditioningMode::Causal, law: engine.causal_law() })
}

/// Smoothing distributions `P(X_{t_j} | F_{t_k})` for `j = 0..=k`.
pub fn smoothed_posterior(
    system: &FunctionalSystem,
    input: &InputModel,
    y: &Path,
    r: f64,
    t_index: usize,
) -> Result<PosteriorState> {
    if t_index > y.grid().n_steps() {
        return Err(Error::InvalidSpec(format!("t_index {t_index} outside grid")));
    }
    let engine = Engine::build(system, input, y, r)?;
    Ok(PosteriorState { mode: ConditioningMode::Smoothed { window: t_index }, law: engine.smoothed_law(t_index) })
}

/// `E[φ(t_k, X, Y) | ·]` under a posterior computed from `y`.
///
/// For Gaussian inputs the system is the additive channel, so `φ = X`.
pub fn conditional_phi(
    system: &FunctionalSystem,
    posterior: &PosteriorState,
    k: usize,
    y: &Path,
    mode: ConditioningMode,
) -> Result<f64> {
    if posterior.mode != mode {
        return Err(Error::InvalidSpec(format!("posterior is {:?}, requested {mode:?}", posterior.mode)));
    }
    if k >= posterior.len() {
        return Err(Error::InvalidSpec(format!("index {k} outside the posterior's range")));
    }
    let grid = y.grid();
    let yv = y.values();
    let g = system.diffusion(k, yv)?;
    let expect = |values: &[f64], probs: &[f64]| -> f64 {
        values
            .iter()
            .zip(probs)
            .map(|(&v, &p)| if p == 0.0 { 0.0 } else { p * system.drift(k, &vec![v; grid.len()], yv) / g })
            .sum()
    };
    Ok(match &posterior.law {
        PosteriorLaw::Finite { values, weights } => expect(values, &weights[k]),
        PosteriorLaw::Markov { states, probs } => expect(states, &probs[k]),
        PosteriorLaw::Gauss { mean, .. } => mean[k],
    })
}

/// Discretized log Radon–Nikodym derivative of the joint input-output law
/// with respect to the product of marginals, evaluated at `t_index`.
pub fn log_rn(
    system: &FunctionalSystem,
    input: &InputModel,
    x: &Path,
    y: &Path,
    r: f64,
    t_index: usize,
) -> Result<f64> {
    if t_index > y.grid().n_steps() {
        return Err(Error::InvalidSpec(format!("t_index {t_index} outside grid")));
    }
    let engine = Engine::build(system, input, y, r)?;
    Ok(engine.log_rn_series(system, x, y, r)?[t_index])
}
