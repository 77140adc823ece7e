//! Outer Monte Carlo ensembles over `(X, W)`: MMSE surfaces, mutual
//! information by three routes, instantaneous information and the residuals
//! of the identities linking them.
//!
//! One replicate draws `(X, W)` once and simulates the output at every `r`
//! node (common random numbers unless disabled), so every per-replicate
//! combination across `r` (finite differences, integrals over `r`) gets an
//! honest standard error.

mod moments;
mod residuals;

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::SnrClass;
use crate::error::{Error, Result};
use crate::estimate::{Engine, WindowMoments};
use crate::grid::TimeGrid;
use crate::inputs::{sample_input_in_slot, InputModel, SystemCatalogEntry};
use crate::noise::NoiseBundle;
use crate::quadrature::{cumulative_trapezoid_uniform, trapezoid, trapezoid_uniform};
use crate::simulate::simulate_output;
use crate::system::FunctionalSystem;

pub use moments::Estimate;
use moments::FlatMoments;
pub use residuals::{Family, IdentityResidualReport, ResidualEntry, ResidualFamily, Tolerances};

/// Replicates per reduction chunk. Fixed so the summation order does not
/// depend on the number of worker threads.
const CHUNK: usize = 64;
/// Chunks evaluated concurrently before their partial sums are merged.
const BATCH: usize = 16;

/// Index of `(window k, index s ≤ k)` in a packed lower-triangular tensor.
pub fn tri_index(k: usize, s: usize) -> usize {
    debug_assert!(s <= k);
    k * (k + 1) / 2 + s
}

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub system_id: String,
    pub system: FunctionalSystem,
    pub input: InputModel,
    pub grid: TimeGrid,
    /// Ascending, distinct, non-negative.
    pub r_grid: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    /// Share `(X, W)` across the `r` grid.
    pub common_noise: bool,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub workers: Option<usize>,
}

impl EnsembleSpec {
    pub fn from_catalog(entry: &SystemCatalogEntry, grid: TimeGrid, r_grid: Vec<f64>, replicates: usize, master_seed: u64) -> Self {
        Self {
            system_id: entry.id.to_string(),
            system: entry.system.clone(),
            input: entry.input.clone(),
            grid,
            r_grid,
            replicates,
            master_seed,
            common_noise: true,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 replicates, got {}", self.replicates)));
        }
        if self.r_grid.is_empty() {
            return Err(Error::InvalidSpec("r_grid is empty".into()));
        }
        if self.r_grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidSpec("r_grid values must be finite and non-negative".into()));
        }
        if self.r_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("r_grid must be strictly ascending".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidSpec("workers must be positive".into()));
        }
        self.input.validate()
    }
}

/// `cmmse` and `ncmmse` with standard errors on the evaluation nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmseSurface {
    pub grid: TimeGrid,
    /// Evaluation nodes: the requested `r` grid with `0` added.
    pub r_values: Vec<f64>,
    /// `[r][k]`.
    pub cmmse: Vec<Vec<Estimate>>,
    /// `[r][tri_index(k, s)]`: error at `t_s` given the output up to `t_k`.
    pub ncmmse: Vec<Vec<Estimate>>,
    pub replicates: usize,
    pub aborted: usize,
}

impl MmseSurface {
    pub fn r_index(&self, r: f64) -> Option<usize> {
        self.r_values.iter().position(|v| *v == r)
    }

    pub fn cmmse_at(&self, k: usize, r: f64) -> Option<Estimate> {
        self.r_index(r).map(|i| self.cmmse[i][k])
    }

    /// `ncmmse(t_k, t_s, r)` for `s ≤ k`.
    pub fn ncmmse_at(&self, k: usize, s: usize, r: f64) -> Option<Estimate> {
        self.r_index(r).map(|i| self.ncmmse[i][tri_index(k, s)])
    }

    fn require(&self, r: f64) -> Result<usize> {
        self.r_index(r).ok_or_else(|| Error::InvalidSpec(format!("surface does not cover r = {r}")))
    }
}

/// Mutual information by estimator, on the evaluation nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoCurve {
    pub r_values: Vec<f64>,
    pub times: Vec<f64>,
    /// `I_i(t_k, r) = (r/2)∫₀^{t_k} cmmse`, `[r][k]`.
    pub duncan: Vec<Vec<Estimate>>,
    /// `E[log_rn(t_k)]`, `[r][k]`.
    pub direct: Vec<Vec<Estimate>>,
    /// Summed expected one-step log-RN increments up to `t_k`, `[r][k]`.
    pub compensator: Vec<Vec<Estimate>>,
    /// `I(r)` by integrating the non-causal error over `r`; present only for
    /// strong-SNR systems.
    pub gsv: Option<Vec<Estimate>>,
}

/// Where each kind of per-replicate value lives in the flat record.
#[derive(Debug, Clone)]
struct Layout {
    nodes: Vec<f64>,
    /// Node index of each requested `r`.
    user: Vec<usize>,
    n: usize,
    dt: f64,
    horizon: f64,
    cmmse: usize,
    ncmmse: usize,
    duncan: usize,
    direct: usize,
    klcum: usize,
    martingale: usize,
    raw_log_rn: usize,
    gsv_mi: usize,
    points: usize,
    residual_points: Vec<residuals::Point>,
    len: usize,
}

impl Layout {
    fn new(spec: &EnsembleSpec) -> Self {
        let mut nodes = spec.r_grid.clone();
        if nodes[0] != 0.0 {
            nodes.insert(0, 0.0);
        }
        let user = spec.r_grid.iter().map(|r| nodes.iter().position(|v| v == r).unwrap()).collect();
        let n = spec.grid.n_steps();
        let l = n + 1;
        let tri = l * (l + 1) / 2;
        let nn = nodes.len();
        let mut off = 0;
        let mut take = |size: usize| {
            let o = off;
            off += size;
            o
        };
        let cmmse = take(nn * l);
        let ncmmse = take(nn * tri);
        let duncan = take(nn * l);
        let direct = take(nn * l);
        let klcum = take(nn * l);
        let martingale = take(nn);
        let raw_log_rn = take(nn);
        let gsv_mi = take(nn);
        let mut layout = Self {
            nodes,
            user,
            n,
            dt: spec.grid.dt(),
            horizon: spec.grid.horizon(),
            cmmse,
            ncmmse,
            duncan,
            direct,
            klcum,
            martingale,
            raw_log_rn,
            gsv_mi,
            points: 0,
            residual_points: Vec::new(),
            len: 0,
        };
        layout.residual_points = residuals::points(&layout);
        layout.points = take(3 * layout.residual_points.len());
        layout.len = off;
        layout
    }

    fn tri_len(&self) -> usize {
        (self.n + 1) * (self.n + 2) / 2
    }
}

/// Per-replicate arrays for one `r` node.
struct NodeRecord {
    e2: Vec<f64>,
    e2s: Vec<f64>,
    direct: Vec<f64>,
    kl: Vec<f64>,
    klcum: Vec<f64>,
    martingale: f64,
    raw_log_rn: f64,
}

enum Outcome {
    Done(Vec<f64>),
    Aborted(AbortReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AbortReason {
    NonFinite,
    NonDegenerate,
}

/// Result of one ensemble run; every reported quantity is derived from it.
#[derive(Debug, Clone)]
pub struct Ensemble {
    layout: Layout,
    moments: FlatMoments,
    grid: TimeGrid,
    aborted_non_finite: usize,
    aborted_non_degenerate: usize,
}

fn run_replicate(spec: &EnsembleSpec, layout: &Layout, rep: u64, wm: &mut WindowMoments) -> Result<Outcome> {
    let n = layout.n;
    let grid = &spec.grid;
    let mut records = Vec::with_capacity(layout.nodes.len());
    for (i, &r) in layout.nodes.iter().enumerate() {
        let slot = if spec.common_noise { 0 } else { i as u64 + 1 };
        let x = sample_input_in_slot(&spec.input, grid, spec.master_seed, rep, slot)?;
        let noise = NoiseBundle::generate_in_slot(grid, spec.master_seed, rep, slot);
        let y = match simulate_output(&spec.system, &x, r, &noise, grid) {
            Ok(y) => y,
            Err(Error::NonFinite { .. }) => return Ok(Outcome::Aborted(AbortReason::NonFinite)),
            Err(Error::NonDegeneracyViolation { .. }) => return Ok(Outcome::Aborted(AbortReason::NonDegenerate)),
            Err(e) => return Err(e),
        };
        let engine = match Engine::build(&spec.system, &spec.input, &y, r) {
            Ok(e) => e,
            Err(Error::NonDegeneracyViolation { .. }) => return Ok(Outcome::Aborted(AbortReason::NonDegenerate)),
            Err(e) => return Err(e),
        };
        let mut e2 = Vec::with_capacity(n + 1);
        let mut e2s = Vec::with_capacity(layout.tri_len());
        let mut direct = Vec::with_capacity(n + 1);
        for k in 0..=n {
            engine.window_moments(k, wm);
            e2s.extend_from_slice(&wm.phi_var);
            e2.push(wm.phi_var[k]);
            direct.push(wm.expected_log_rn);
        }
        let kl = engine.expected_kl_increments();
        let mut klcum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        klcum.push(0.0);
        for v in &kl {
            acc += v;
            klcum.push(acc);
        }
        let log_rn_t = engine.log_rn_series(&spec.system, &x, &y, r)?[n];
        records.push(NodeRecord {
            e2,
            e2s,
            direct,
            kl,
            klcum,
            martingale: (-log_rn_t).exp(),
            raw_log_rn: log_rn_t,
        });
    }

    let mut flat = vec![0.0; layout.len];
    let l = n + 1;
    let tri = layout.tri_len();
    let mut gsv_acc = 0.0;
    let mut prev_half_nc = 0.0;
    for (i, rec) in records.iter().enumerate() {
        let r = layout.nodes[i];
        flat[layout.cmmse + i * l..layout.cmmse + (i + 1) * l].copy_from_slice(&rec.e2);
        flat[layout.ncmmse + i * tri..layout.ncmmse + (i + 1) * tri].copy_from_slice(&rec.e2s);
        let cum = cumulative_trapezoid_uniform(&rec.e2, layout.dt);
        for (k, c) in cum.iter().enumerate() {
            flat[layout.duncan + i * l + k] = 0.5 * r * c;
        }
        flat[layout.direct + i * l..layout.direct + (i + 1) * l].copy_from_slice(&rec.direct);
        flat[layout.klcum + i * l..layout.klcum + (i + 1) * l].copy_from_slice(&rec.klcum);
        flat[layout.martingale + i] = rec.martingale;
        flat[layout.raw_log_rn + i] = rec.raw_log_rn;
        let half_nc = 0.5 * trapezoid_uniform(&rec.e2s[tri_index(n, 0)..], layout.dt);
        if i > 0 {
            gsv_acc += 0.5 * (layout.nodes[i] - layout.nodes[i - 1]) * (half_nc + prev_half_nc);
        }
        prev_half_nc = half_nc;
        flat[layout.gsv_mi + i] = gsv_acc;
    }
    for (p, point) in layout.residual_points.iter().enumerate() {
        let (left, right) = residuals::sides(layout, point, &records);
        let o = layout.points + 3 * p;
        flat[o] = left;
        flat[o + 1] = right;
        flat[o + 2] = left - right;
    }
    // The raw change-of-measure weight may overflow on its own; only the
    // estimator inputs decide whether the replicate is usable.
    let usable = flat[..layout.martingale].iter().chain(&flat[layout.gsv_mi..]).all(|v| v.is_finite());
    if !usable {
        return Ok(Outcome::Aborted(AbortReason::NonFinite));
    }
    Ok(Outcome::Done(flat))
}

struct Partial {
    moments: FlatMoments,
    non_finite: usize,
    non_degenerate: usize,
}

fn run_chunk(spec: &EnsembleSpec, layout: &Layout, start: usize, end: usize) -> Result<Partial> {
    let mut part = Partial { moments: FlatMoments::new(layout.len), non_finite: 0, non_degenerate: 0 };
    let mut wm = WindowMoments::default();
    for rep in start..end {
        match run_replicate(spec, layout, rep as u64, &mut wm)? {
            Outcome::Done(flat) => part.moments.push(&flat),
            Outcome::Aborted(AbortReason::NonFinite) => part.non_finite += 1,
            Outcome::Aborted(AbortReason::NonDegenerate) => part.non_degenerate += 1,
        }
    }
    Ok(part)
}

/// Runs the ensemble. Aborted replicates are dropped at every `r`.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<Ensemble> {
    spec.validate()?;
    let layout = Layout::new(spec);
    let work = || -> Result<Ensemble> {
        let n_chunks = spec.replicates.div_ceil(CHUNK);
        let mut total = FlatMoments::new(layout.len);
        let (mut non_finite, mut non_degenerate) = (0, 0);
        for batch in (0..n_chunks).collect::<Vec<_>>().chunks(BATCH) {
            let parts: Vec<Result<Partial>> = batch
                .par_iter()
                .map(|&c| run_chunk(spec, &layout, c * CHUNK, ((c + 1) * CHUNK).min(spec.replicates)))
                .collect();
            for part in parts {
                let part = part?;
                total.merge(&part.moments);
                non_finite += part.non_finite;
                non_degenerate += part.non_degenerate;
            }
        }
        if total.count() < 2 {
            return Err(Error::TooFewReplicates(spec.replicates));
        }
        Ok(Ensemble {
            layout: layout.clone(),
            moments: total,
            grid: spec.grid,
            aborted_non_finite: non_finite,
            aborted_non_degenerate: non_degenerate,
        })
    };
    match spec.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidSpec(format!("cannot start {w} workers: {e}")))?
            .install(work),
        None => work(),
    }
}

impl Ensemble {
    pub fn r_values(&self) -> &[f64] {
        &self.layout.nodes
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Replicates that entered the averages.
    pub fn replicates(&self) -> usize {
        self.moments.count()
    }

    pub fn aborted(&self) -> usize {
        self.aborted_non_finite + self.aborted_non_degenerate
    }

    pub fn aborted_non_finite(&self) -> usize {
        self.aborted_non_finite
    }

    pub fn aborted_non_degenerate(&self) -> usize {
        self.aborted_non_degenerate
    }

    fn node(&self, r: f64) -> Result<usize> {
        self.layout
            .nodes
            .iter()
            .position(|v| *v == r)
            .ok_or_else(|| Error::InvalidSpec(format!("ensemble does not cover r = {r}")))
    }

    fn block(&self, offset: usize, size: usize, i: usize) -> Vec<Estimate> {
        (0..size).map(|k| self.moments.estimate(offset + i * size + k)).collect()
    }

    pub fn surface(&self) -> MmseSurface {
        let l = self.layout.n + 1;
        let nn = self.layout.nodes.len();
        MmseSurface {
            grid: self.grid,
            r_values: self.layout.nodes.clone(),
            cmmse: (0..nn).map(|i| self.block(self.layout.cmmse, l, i)).collect(),
            ncmmse: (0..nn).map(|i| self.block(self.layout.ncmmse, self.layout.tri_len(), i)).collect(),
            replicates: self.replicates(),
            aborted: self.aborted(),
        }
    }

    /// Mutual-information curves; the GSV route is filled only when `class`
    /// is strong-SNR.
    pub fn info_curve(&self, class: SnrClass) -> InfoCurve {
        let l = self.layout.n + 1;
        let nn = self.layout.nodes.len();
        InfoCurve {
            r_values: self.layout.nodes.clone(),
            times: self.grid.times(),
            duncan: (0..nn).map(|i| self.block(self.layout.duncan, l, i)).collect(),
            direct: (0..nn).map(|i| self.block(self.layout.direct, l, i)).collect(),
            compensator: (0..nn).map(|i| self.block(self.layout.klcum, l, i)).collect(),
            gsv: (class == SnrClass::StrongSnr).then(|| (0..nn).map(|i| self.moments.estimate(self.layout.gsv_mi + i)).collect()),
        }
    }

    /// `E[exp(−log_rn(T))]`, which equals 1 for the exact change of measure.
    pub fn martingale(&self, r: f64) -> Result<Estimate> {
        Ok(self.moments.estimate(self.layout.martingale + self.node(r)?))
    }

    /// Ensemble mean of the unconditioned `log_rn(T)`.
    pub fn raw_log_rn(&self, r: f64) -> Result<Estimate> {
        Ok(self.moments.estimate(self.layout.raw_log_rn + self.node(r)?))
    }

    /// `I_i(t_k, r)` from the summed expected log-RN increments.
    pub fn compensator_info(&self, k: usize, r: f64) -> Result<Estimate> {
        Ok(self.moments.estimate(self.layout.klcum + self.node(r)? * (self.layout.n + 1) + k))
    }

    pub fn mi_direct(&self, r: f64) -> Result<Estimate> {
        Ok(self.moments.estimate(self.layout.direct + self.node(r)? * (self.layout.n + 1) + self.layout.n))
    }

    pub fn mi_duncan(&self, r: f64) -> Result<Estimate> {
        Ok(self.moments.estimate(self.layout.duncan + self.node(r)? * (self.layout.n + 1) + self.layout.n))
    }

    pub fn mi_gsv(&self, r: f64, class: SnrClass) -> Result<Estimate> {
        if class != SnrClass::StrongSnr {
            return Err(Error::NotStrongSnr(class));
        }
        Ok(self.moments.estimate(self.layout.gsv_mi + self.node(r)?))
    }

    pub fn residuals(&self, class: SnrClass, tolerances: Tolerances) -> IdentityResidualReport {
        residuals::report(&self.layout, &self.moments, class, tolerances)
    }
}

/// Runs an ensemble and returns its MMSE surface.
pub fn estimate_mmse_surface(spec: &EnsembleSpec) -> Result<MmseSurface> {
    Ok(run_ensemble(spec)?.surface())
}

/// `(r/2)∫₀ᵀ cmmse(t, r) dt` by the trapezoid rule on the surface.
pub fn mi_duncan(surface: &MmseSurface, r: f64) -> Result<f64> {
    instantaneous_info(surface, surface.grid.n_steps(), r)
}

/// `(r/2)∫₀^{t_k} cmmse(s, r) ds`.
pub fn instantaneous_info(surface: &MmseSurface, t_index: usize, r: f64) -> Result<f64> {
    if t_index > surface.grid.n_steps() {
        return Err(Error::InvalidSpec(format!("t_index {t_index} outside grid")));
    }
    let i = surface.require(r)?;
    let values: Vec<f64> = surface.cmmse[i][..=t_index].iter().map(|e| e.mean).collect();
    Ok(0.5 * r * trapezoid_uniform(&values, surface.grid.dt()))
}

/// `(1/2)∫₀^r ∫₀ᵀ ncmmse(T, s, u) ds du` by trapezoid rules over the grid and
/// the surface's `r` nodes. Refused unless the system is strong-SNR.
pub fn mi_gsv(surface: &MmseSurface, r: f64, class: SnrClass) -> Result<f64> {
    if class != SnrClass::StrongSnr {
        return Err(Error::NotStrongSnr(class));
    }
    let i = surface.require(r)?;
    let n = surface.grid.n_steps();
    let inner: Vec<f64> = surface.ncmmse[..=i]
        .iter()
        .map(|nc| {
            let row: Vec<f64> = nc[tri_index(n, 0)..=tri_index(n, n)].iter().map(|e| e.mean).collect();
            0.5 * trapezoid_uniform(&row, surface.grid.dt())
        })
        .collect();
    Ok(trapezoid(&surface.r_values[..=i], &inner))
}

/// Ensemble estimate of `E[log_rn(T)]` at a single `r`.
pub fn mi_direct(spec: &EnsembleSpec, r: f64) -> Result<Estimate> {
    let single = EnsembleSpec { r_grid: vec![r], ..spec.clone() };
    run_ensemble(&single)?.mi_direct(r)
}

/// Runs an ensemble and evaluates every identity residual.
pub fn identity_residuals(spec: &EnsembleSpec, class: SnrClass, tolerances: Tolerances) -> Result<IdentityResidualReport> {
    Ok(run_ensemble(spec)?.residuals(class, tolerances))
}
