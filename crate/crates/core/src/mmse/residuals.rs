//! Residuals of the six identity families, with both sides kept.
//!
//! Every entry is a per-replicate difference `left − right` averaged over the
//! ensemble, so its standard error accounts for the coupling between the two
//! sides. Finite differences in `r` use the neighbouring points of the
//! requested grid and are reported only at its interior points.

use serde::{Deserialize, Serialize};

use super::moments::{Estimate, FlatMoments};
use super::{tri_index, Layout, NodeRecord};
use crate::classify::SnrClass;
use crate::quadrature::{trapezoid, trapezoid_uniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `I(r)` against `(r/2)∫₀ᵀ cmmse dt`.
    Duncan,
    /// `dI/dr` against `(1/2)∫₀ᵀ ncmmse(T, s, r) ds`.
    Gsv,
    /// Time-averaged `cmmse` against the `r`-average of time-averaged `ncmmse`.
    Cor1,
    /// `∂_t I_i(t, r)` against `(r/2)cmmse(t, r)`.
    D1Time,
    /// `∂_r I_i(t, r)` against `(1/2)∫₀ᵗ ncmmse(t, s, r) ds`.
    D1Snr,
    /// `r·∂_r cmmse(t, r)` against `∫₀ᵗ ∂_t ncmmse(t, s, r) ds`.
    Cor3Mixed,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::Duncan, Family::Gsv, Family::Cor1, Family::D1Time, Family::D1Snr, Family::Cor3Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Family::Duncan => "duncan",
            Family::Gsv => "gsv",
            Family::Cor1 => "cor1",
            Family::D1Time => "d1_time",
            Family::D1Snr => "d1_snr",
            Family::Cor3Mixed => "cor3_mixed",
        }
    }

    /// Families that hold only for strong-SNR systems.
    pub fn snr_gated(self) -> bool {
        matches!(self, Family::Gsv | Family::Cor1 | Family::D1Snr | Family::Cor3Mixed)
    }

    fn sides(self) -> (&'static str, &'static str) {
        match self {
            Family::Duncan => ("I_direct", "(r/2)*int cmmse dt"),
            Family::Gsv => ("dI/dr", "(1/2)*int ncmmse(T,s,r) ds"),
            Family::Cor1 => ("avg cmmse", "(1/r)*int_0^r avg ncmmse du"),
            Family::D1Time => ("dI_i/dt", "(r/2)*cmmse(t,r)"),
            Family::D1Snr => ("dI_i/dr", "(1/2)*int_0^t ncmmse(t,s,r) ds"),
            Family::Cor3Mixed => ("r*dcmmse/dr", "int_0^t d/dt ncmmse(t,s,r) ds"),
        }
    }
}

/// Pass threshold `max(absolute, se_multiplier·SE)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub absolute: f64,
    pub se_multiplier: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { absolute: 0.01, se_multiplier: 3.0 }
    }
}

impl Tolerances {
    pub fn threshold(&self, se: f64) -> f64 {
        let s = if se.is_finite() { self.se_multiplier * se } else { 0.0 };
        self.absolute.max(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub r: f64,
    pub t: Option<f64>,
    pub left: Estimate,
    pub right: Estimate,
    /// Ensemble mean of `left − right`.
    pub residual: f64,
    pub se: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualFamily {
    pub family: Family,
    pub left_side: &'static str,
    pub right_side: &'static str,
    /// Reported but excluded from the overall verdict.
    pub diagnostic: bool,
    pub passed: bool,
    pub entries: Vec<ResidualEntry>,
}

impl ResidualFamily {
    /// Entry with the largest `|residual| / tolerance`.
    pub fn worst(&self) -> Option<&ResidualEntry> {
        self.entries.iter().max_by(|a, b| {
            let fa = a.residual.abs() / a.tolerance;
            let fb = b.residual.abs() / b.tolerance;
            fa.total_cmp(&fb)
        })
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| !e.passed).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidualReport {
    pub class: SnrClass,
    pub tolerances: Tolerances,
    pub families: Vec<ResidualFamily>,
    /// All non-diagnostic families passed.
    pub passed: bool,
}

impl IdentityResidualReport {
    pub fn family(&self, family: Family) -> &ResidualFamily {
        self.families.iter().find(|f| f.family == family).expect("every family is reported")
    }

    /// Names of the non-diagnostic families with at least one failing entry.
    pub fn failing(&self) -> Vec<&'static str> {
        self.families.iter().filter(|f| !f.diagnostic && !f.passed).map(|f| f.family.name()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Point {
    pub(crate) family: Family,
    pub(crate) node: usize,
    lo: usize,
    hi: usize,
    pub(crate) k: usize,
}

fn subsample(n: usize) -> impl Iterator<Item = usize> {
    let step = (n / 10).max(1);
    (step..=n).step_by(step)
}

pub(crate) fn points(layout: &Layout) -> Vec<Point> {
    let n = layout.n;
    let user = &layout.user;
    let interior: Vec<(usize, usize, usize)> = (1..user.len().saturating_sub(1)).map(|j| (user[j], user[j - 1], user[j + 1])).collect();
    let mut out = Vec::new();
    for family in Family::ALL {
        let p = |node, lo, hi, k| Point { family, node, lo, hi, k };
        match family {
            Family::Duncan => out.extend(user.iter().map(|&u| p(u, u, u, n))),
            Family::Gsv => out.extend(interior.iter().map(|&(u, lo, hi)| p(u, lo, hi, n))),
            Family::Cor1 => out.extend(user.iter().filter(|&&u| layout.nodes[u] > 0.0).map(|&u| p(u, u, u, n))),
            Family::D1Time => {
                for &u in user {
                    out.extend((1..n).map(|k| p(u, u, u, k)));
                }
            }
            Family::D1Snr => {
                for &(u, lo, hi) in &interior {
                    out.extend(subsample(n).map(|k| p(u, lo, hi, k)));
                }
            }
            Family::Cor3Mixed => {
                for &(u, lo, hi) in &interior {
                    out.extend(subsample(n).filter(|&k| k < n).map(|k| p(u, lo, hi, k)));
                }
            }
        }
    }
    out
}

fn window_row(e2s: &[f64], k: usize) -> &[f64] {
    &e2s[tri_index(k, 0)..=tri_index(k, k)]
}

/// Per-replicate values of both sides at one point.
pub(crate) fn sides(layout: &Layout, point: &Point, records: &[NodeRecord]) -> (f64, f64) {
    let (n, dt, horizon) = (layout.n, layout.dt, layout.horizon);
    let rec = &records[point.node];
    let r = layout.nodes[point.node];
    let dr = layout.nodes[point.hi] - layout.nodes[point.lo];
    let k = point.k;
    match point.family {
        Family::Duncan => (rec.direct[n], 0.5 * r * trapezoid_uniform(&rec.e2, dt)),
        Family::Gsv => (
            (records[point.hi].klcum[n] - records[point.lo].klcum[n]) / dr,
            0.5 * trapezoid_uniform(window_row(&rec.e2s, n), dt),
        ),
        Family::Cor1 => {
            let avg_nc: Vec<f64> =
                records[..=point.node].iter().map(|q| trapezoid_uniform(window_row(&q.e2s, n), dt) / horizon).collect();
            (trapezoid_uniform(&rec.e2, dt) / horizon, trapezoid(&layout.nodes[..=point.node], &avg_nc) / r)
        }
        Family::D1Time => ((rec.kl[k - 1] + rec.kl[k]) / (2.0 * dt), 0.5 * r * rec.e2[k]),
        Family::D1Snr => (
            (records[point.hi].klcum[k] - records[point.lo].klcum[k]) / dr,
            0.5 * trapezoid_uniform(window_row(&rec.e2s, k), dt),
        ),
        Family::Cor3Mixed => {
            let left = r * (records[point.hi].e2[k] - records[point.lo].e2[k]) / dr;
            let (prev, cur, next) = (window_row(&rec.e2s, k - 1), window_row(&rec.e2s, k), window_row(&rec.e2s, k + 1));
            let deriv: Vec<f64> = (0..=k)
                .map(|s| if s < k { (next[s] - prev[s]) / (2.0 * dt) } else { (next[k] - cur[k]) / dt })
                .collect();
            (left, trapezoid_uniform(&deriv, dt))
        }
    }
}

pub(crate) fn report(layout: &Layout, moments: &FlatMoments, class: SnrClass, tolerances: Tolerances) -> IdentityResidualReport {
    let times_of = |k: usize| layout.horizon * k as f64 / layout.n as f64;
    let mut families: Vec<ResidualFamily> = Family::ALL
        .iter()
        .map(|&family| {
            let (left_side, right_side) = family.sides();
            ResidualFamily {
                family,
                left_side,
                right_side,
                diagnostic: family.snr_gated() && class != SnrClass::StrongSnr,
                passed: true,
                entries: Vec::new(),
            }
        })
        .collect();
    for (p, point) in layout.residual_points.iter().enumerate() {
        let o = layout.points + 3 * p;
        let diff = moments.estimate(o + 2);
        let tolerance = tolerances.threshold(diff.se);
        let passed = diff.mean.abs() <= tolerance;
        let t = matches!(point.family, Family::D1Time | Family::D1Snr | Family::Cor3Mixed).then(|| times_of(point.k));
        let fam = families.iter_mut().find(|f| f.family == point.family).expect("known family");
        fam.passed &= passed;
        fam.entries.push(ResidualEntry {
            r: layout.nodes[point.node],
            t,
            left: moments.estimate(o),
            right: moments.estimate(o + 1),
            residual: diff.mean,
            se: diff.se,
            tolerance,
            passed,
        });
    }
    let passed = families.iter().all(|f| f.diagnostic || f.passed);
    IdentityResidualReport { class, tolerances, families, passed }
}
