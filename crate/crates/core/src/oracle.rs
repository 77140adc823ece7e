//! Reference values that do not go through the simulator or the filters.
//!
//! The Gaussian and finite-alphabet references use the continuous-time
//! sufficient statistic `Y_t = √r·X·t + W_t` of the additive channel; they
//! differ from grid-based estimates by the Euler–Maruyama discretization
//! error only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::path_loglik;
use crate::grid::Path;
use crate::inputs::{enumerate_support, InputModel, Support};
use crate::quadrature::GaussHermite;
use crate::system::FunctionalSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `cmmse(t, r)`.
    Cmmse,
    /// `ncmmse(T, s, r)`, constant in `s` for constant inputs.
    Ncmmse,
    /// `I(r)` over `[0, T]`.
    Mi,
    /// `dI/dr`.
    DmiDr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum OracleMethod {
    ClosedForm,
    Quadrature { nodes: usize },
    Enumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub quantity: Quantity,
    pub t: f64,
    pub r: f64,
    pub horizon: f64,
    pub value: f64,
    pub method: OracleMethod,
}

/// Closed forms for a `Normal(0, σ²)` constant input on the additive channel.
pub fn gauss_oracle(quantity: Quantity, t: f64, r: f64, sigma2: f64, horizon: f64) -> OracleValue {
    let value = match quantity {
        Quantity::Cmmse => sigma2 / (1.0 + r * sigma2 * t),
        Quantity::Ncmmse => sigma2 / (1.0 + r * sigma2 * horizon),
        Quantity::Mi => 0.5 * (r * sigma2 * horizon).ln_1p(),
        Quantity::DmiDr => sigma2 * horizon / (2.0 * (1.0 + r * sigma2 * horizon)),
    };
    OracleValue { quantity, t, r, horizon, value, method: OracleMethod::ClosedForm }
}

/// `E[sech²(snr + √snr·U)]`: MMSE of an equiprobable ±1 input observed at
/// signal-to-noise ratio `snr`.
fn bpsk_mmse(snr: f64, rule: &GaussHermite) -> f64 {
    if snr == 0.0 {
        return 1.0;
    }
    let s = snr.sqrt();
    rule.expect_standard_normal(|u| {
        let c = (snr + s * u).cosh();
        1.0 / (c * c)
    })
}

/// `snr − E[ln cosh(snr + √snr·U)]`.
fn bpsk_mi(snr: f64, rule: &GaussHermite) -> f64 {
    if snr == 0.0 {
        return 0.0;
    }
    let s = snr.sqrt();
    snr - rule.expect_standard_normal(|u| {
        let a = (snr + s * u).abs();
        // ln cosh a = a + ln(1 + e^{-2a}) − ln 2
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    })
}

const MAX_NODES: usize = 2048;

/// Doubles the node count from `n_nodes` until two successive rules agree to
/// `1e-8`; returns the finer value and its node count.
fn stable_quadrature(n_nodes: usize, f: impl Fn(&GaussHermite) -> f64) -> Result<(f64, usize)> {
    if n_nodes < 32 {
        return Err(Error::InvalidSpec(format!("need at least 32 quadrature nodes, got {n_nodes}")));
    }
    let mut n = n_nodes;
    let mut coarse = f(&GaussHermite::new(n));
    loop {
        let fine = f(&GaussHermite::new(2 * n));
        let delta = (coarse - fine).abs();
        if delta <= 1e-8 {
            return Ok((fine, 2 * n));
        }
        if 2 * n >= MAX_NODES {
            return Err(Error::QuadratureUnstable { nodes: n, doubled: 2 * n, delta });
        }
        n *= 2;
        coarse = fine;
    }
}

/// References for an equiprobable ±1 constant input on the additive channel.
pub fn bpsk_oracle(quantity: Quantity, t: f64, r: f64, horizon: f64, n_nodes: usize) -> Result<OracleValue> {
    let (value, nodes) = match quantity {
        Quantity::Cmmse => stable_quadrature(n_nodes, |g| bpsk_mmse(r * t, g))?,
        Quantity::Ncmmse => stable_quadrature(n_nodes, |g| bpsk_mmse(r * horizon, g))?,
        Quantity::Mi => stable_quadrature(n_nodes, |g| bpsk_mi(r * horizon, g))?,
        Quantity::DmiDr => {
            let (v, nodes) = stable_quadrature(n_nodes, |g| bpsk_mmse(r * horizon, g))?;
            (0.5 * horizon * v, nodes)
        }
    };
    Ok(OracleValue { quantity, t, r, horizon, value, method: OracleMethod::Quadrature { nodes } })
}

/// `cmmse(t, r)` for an arbitrary finite-alphabet constant input on the
/// additive channel, by Bayes' rule on `Y_t` and Gauss–Hermite quadrature over
/// the noise, conditioned on each alphabet value.
pub fn finite_awgn_cmmse(values: &[f64], probabilities: &[f64], t: f64, r: f64, n_nodes: usize) -> Result<OracleValue> {
    let prior_var = {
        let m: f64 = values.iter().zip(probabilities).map(|(v, p)| v * p).sum();
        values.iter().zip(probabilities).map(|(v, p)| p * (v - m).powi(2)).sum::<f64>()
    };
    let eval = |rule: &GaussHermite| -> f64 {
        if r * t == 0.0 {
            return prior_var;
        }
        let sr = r.sqrt();
        let st = t.sqrt();
        values
            .iter()
            .zip(probabilities)
            .map(|(&a, &pa)| {
                pa * rule.expect_standard_normal(|u| {
                    let y = sr * a * t + st * u;
                    let logs: Vec<f64> =
                        values.iter().zip(probabilities).map(|(&b, &pb)| pb.ln() + sr * b * y - 0.5 * r * b * b * t).collect();
                    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
                    let mean: f64 = values.iter().zip(&logs).map(|(b, l)| b * (l - m).exp()).sum::<f64>() / z;
                    (a - mean).powi(2)
                })
            })
            .sum()
    };
    let (value, nodes) = stable_quadrature(n_nodes, eval)?;
    Ok(OracleValue { quantity: Quantity::Cmmse, t, r, horizon: t, value, method: OracleMethod::Quadrature { nodes } })
}

/// Exact smoothing marginals of a telegraph input by summing prior ×
/// likelihood over every state sequence. Only for grids with at most 10 steps.
pub fn telegraph_bruteforce(system: &FunctionalSystem, input: &InputModel, y: &Path, r: f64) -> Result<Vec<[f64; 2]>> {
    let grid = y.grid();
    let n = grid.n_steps();
    if n > 10 {
        return Err(Error::TooLarge(n));
    }
    let Support::Markov(handle) = enumerate_support(input, &grid) else {
        return Err(Error::UnsupportedInput("brute-force smoothing needs a telegraph input".into()));
    };
    let n_points = n + 1;
    let mut log_joint = Vec::with_capacity(1 << n_points);
    for code in 0u32..(1 << n_points) {
        let states: Vec<usize> = (0..n_points).map(|j| ((code >> j) & 1) as usize).collect();
        let mut lp = handle.initial[states[0]].ln();
        for w in states.windows(2) {
            lp += handle.transition[w[0]][w[1]].ln();
        }
        let x = Path::new(grid, states.iter().map(|&s| handle.states[s]).collect())?;
        lp += path_loglik(system, &x, y, r)?;
        log_joint.push(lp);
    }
    let m = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_joint.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut marginals = vec![[0.0; 2]; n_points];
    for (code, w) in weights.iter().enumerate() {
        for (j, m) in marginals.iter_mut().enumerate() {
            m[(code >> j) & 1] += w / z;
        }
    }
    Ok(marginals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_closed_forms() {
        assert_eq!(gauss_oracle(Quantity::Mi, 1.0, 0.0, 1.0, 1.0).value, 0.0);
        assert_relative_eq!(gauss_oracle(Quantity::Cmmse, 1.0, 1.0, 1.0, 1.0).value, 0.5, epsilon = 1e-15);
        assert_relative_eq!(gauss_oracle(Quantity::DmiDr, 1.0, 1.0, 1.0, 1.0).value, 0.25, epsilon = 1e-15);
        assert_relative_eq!(gauss_oracle(Quantity::Mi, 1.0, 1.0, 1.0, 1.0).value, 0.5 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn bpsk_edges() {
        assert_eq!(bpsk_oracle(Quantity::Cmmse, 1.0, 0.0, 1.0, 64).unwrap().value, 1.0);
        let big = bpsk_oracle(Quantity::Cmmse, 1.0, 100.0, 1.0, 64).unwrap().value;
        assert!((0.0..1e-3).contains(&big));
        let g64 = bpsk_mmse(1.0, &GaussHermite::new(64));
        let g128 = bpsk_mmse(1.0, &GaussHermite::new(128));
        assert!((g64 - g128).abs() < 1e-8);
        assert!(bpsk_oracle(Quantity::Cmmse, 1.0, 1.0, 1.0, 16).is_err());
        let v = bpsk_oracle(Quantity::Cmmse, 1.0, 1.0, 1.0, 64).unwrap();
        assert_eq!(v.method, OracleMethod::Quadrature { nodes: 128 });
    }

    #[test]
    fn bpsk_monotone_in_snr() {
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let snr = i as f64 * 0.25;
            let v = bpsk_oracle(Quantity::Cmmse, 1.0, snr, 1.0, 64).unwrap().value;
            assert!(v <= prev + 1e-14);
            prev = v;
        }
    }

    #[test]
    fn bpsk_mi_derivative_is_half_mmse() {
        let g = GaussHermite::new(128);
        for snr in [0.3, 1.0, 2.0] {
            let h = 1e-4;
            let d = (bpsk_mi(snr + h, &g) - bpsk_mi(snr - h, &g)) / (2.0 * h);
            assert_relative_eq!(d, 0.5 * bpsk_mmse(snr, &g), epsilon = 1e-7);
        }
    }

    #[test]
    fn finite_oracle_agrees_with_bpsk_form() {
        for (t, r) in [(1.0, 1.0), (0.5, 2.0), (0.2, 0.1)] {
            let a = finite_awgn_cmmse(&[1.0, -1.0], &[0.5, 0.5], t, r, 64).unwrap().value;
            let b = bpsk_oracle(Quantity::Cmmse, t, r, 1.0, 64).unwrap().value;
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        // Shifting the alphabet does not change the error.
        let a = finite_awgn_cmmse(&[0.5, 1.5], &[0.5, 0.5], 1.0, 4.0, 64).unwrap().value;
        let b = bpsk_oracle(Quantity::Cmmse, 1.0, 1.0, 1.0, 64).unwrap().value * 0.25;
        assert_relative_eq!(a, b, epsilon = 1e-10);
    }

    #[test]
    fn bruteforce_single_step_by_hand() {
        let grid = TimeGrid::new(0.5, 1).unwrap();
        let y = Path::new(grid, vec![0.0, 0.3]).unwrap();
        let model = InputModel::telegraph(0.7);
        let sys = FunctionalSystem::awgn();
        let r = 2.0;
        let m = bruteforce_or_panic(&sys, &model, &y, r);
        // s_0 posterior ∝ ½·N(0.3; ±√r·Δ, Δ); the ratio reduces to exp(2√r·Δy).
        let ratio = (2.0 * r.sqrt() * 0.3f64).exp();
        assert_relative_eq!(m[0][0], ratio / (1.0 + ratio), epsilon = 1e-12);
        let p = crate::inputs::telegraph_switch_probability(0.7, 0.5);
        assert_relative_eq!(m[1][0], m[0][0] * (1.0 - p) + m[0][1] * p, epsilon = 1e-12);
    }

    fn bruteforce_or_panic(sys: &FunctionalSystem, model: &InputModel, y: &Path, r: f64) -> Vec<[f64; 2]> {
        telegraph_bruteforce(sys, model, y, r).unwrap()
    }

    #[test]
    fn bruteforce_limits() {
        let grid = TimeGrid::new(1.0, 11).unwrap();
        let y = Path::zeros(grid);
        assert_eq!(
            telegraph_bruteforce(&FunctionalSystem::awgn(), &InputModel::telegraph(1.0), &y, 1.0),
            Err(Error::TooLarge(11))
        );
    }
}
