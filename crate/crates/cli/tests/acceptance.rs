//! The twelve acceptance criteria with pinned tolerances. Each prints one
//! `PASS`/`FAIL` line; the process exits non-zero if any criterion fails.
//!
//! Reference values are computed here from first principles (closed forms,
//! direct numerical integration, brute-force enumeration), not taken from the
//! crate's own oracle module.

use std::fs;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdelab_cli::{cmd_run, ExperimentConfig, GridConfig};
use sdelab_core::estimate::{causal_posterior, smoothed_posterior};
use sdelab_core::inputs::sample_input;
use sdelab_core::oracle::{bpsk_oracle, telegraph_bruteforce, Quantity};
use sdelab_core::simulate::simulate_output;
use sdelab_core::{
    catalog, catalog_entry, classify_system, run_ensemble, z_transform, CatalogOverrides, Ensemble, EnsembleSpec, Family,
    InputModel, NoiseBundle, Path, SnrClass, TimeGrid, Tolerances,
};

/// Fixed before any criterion was run.
const SEED: u64 = 1;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn spec(id: &str, n: usize, r_grid: Vec<f64>, replicates: usize) -> EnsembleSpec {
    let entry = catalog_entry(id, &CatalogOverrides::default()).unwrap();
    EnsembleSpec::from_catalog(&entry, TimeGrid::new(1.0, n).unwrap(), r_grid, replicates, SEED)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `E[1 − tanh(snr + √snr·U)]` for standard normal `U`, by composite Simpson
/// on `[−12, 12]`.
fn bpsk_mmse_simpson(snr: f64) -> f64 {
    let (a, b, m) = (-12.0f64, 12.0f64, 24_000usize);
    let h = (b - a) / m as f64;
    let f = |u: f64| (1.0 - (snr + snr.sqrt() * u).tanh()) * (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn c1_c2(gauss: &Ensemble, seconds: f64) -> (Outcome, Outcome) {
    let oracle = 0.5 * 2f64.ln();
    let duncan = gauss.mi_duncan(1.0).unwrap();
    let direct = gauss.mi_direct(1.0).unwrap();
    let ok1 = rel(duncan.mean, oracle) <= 0.02 && rel(direct.mean, oracle) <= 0.02 && seconds < 60.0;
    let c1 = outcome(
        ok1,
        format!("duncan {:.6}, direct {:.6} (se {:.4}), oracle {oracle:.6}, ensemble {seconds:.1}s", duncan.mean, direct.mean, direct.se),
    );

    let s = gauss.surface();
    let n = s.grid.n_steps();
    let end = s.cmmse_at(n, 1.0).unwrap().mean;
    let sup = (0..=n).map(|k| rel(s.cmmse_at(k, 1.0).unwrap().mean, 1.0 / (1.0 + s.grid.time(k)))).fold(0.0, f64::max);
    let c2 = outcome(rel(end, 0.5) <= 0.02 && sup <= 0.03, format!("cmmse(1,1) = {end:.6}; sup relative error {sup:.2e}"));
    (c1, c2)
}

fn c3_c4() -> (Outcome, Outcome) {
    let ens = run_ensemble(&spec("awgn-gauss", 200, vec![0.5, 1.0, 1.5], 10_000)).unwrap();
    let rep = ens.residuals(SnrClass::StrongSnr, Tolerances::default());
    let g = rep.family(Family::Gsv).entries.iter().find(|e| e.r == 1.0).unwrap().clone();
    let c3 = outcome(
        g.residual.abs() <= 0.01,
        format!("dI/dr {:.5} vs (1/2)int ncmmse {:.5}, residual {:.2e}; oracle 0.25", g.left.mean, g.right.mean, g.residual),
    );
    let c = rep.family(Family::Cor1).entries.iter().find(|e| e.r == 1.0).unwrap().clone();
    let bound = 0.03 * 2f64.ln();
    let c4 = outcome(
        c.residual.abs() <= bound,
        format!("avg cmmse {:.5} vs r-average {:.5}, residual {:.2e} (bound {bound:.4}); ln 2 = {:.5}", c.left.mean, c.right.mean, c.residual, 2f64.ln()),
    );
    (c3, c4)
}

fn c5(gauss: &Ensemble) -> Outcome {
    let rep = gauss.residuals(SnrClass::StrongSnr, Tolerances::default());
    let entries: Vec<_> = rep.family(Family::D1Time).entries.iter().filter(|e| e.r == 1.0).cloned().collect();
    let fails = entries.iter().filter(|e| e.residual.abs() > 0.01f64.max(3.0 * e.se)).count();
    let worst = entries.iter().map(|e| e.residual.abs()).fold(0.0, f64::max);
    let s = gauss.surface();
    let k_half = s.grid.n_steps() / 2;
    let ii = sdelab_core::mmse::instantaneous_info(&s, k_half, 1.0).unwrap();
    let oracle = 0.5 * 1.5f64.ln();
    outcome(
        fails == 0 && entries.len() == s.grid.n_steps() - 1 && rel(ii, oracle) <= 0.02,
        format!("{} interior points, {fails} outside band, max |residual| {worst:.2e}; I_i(0.5,1) = {ii:.5} vs {oracle:.5}", entries.len()),
    )
}

fn c6() -> Outcome {
    let ens = run_ensemble(&spec("awgn-bpsk", 50, vec![1.0], 10_000)).unwrap();
    let s = ens.surface();
    let n = s.grid.n_steps();
    let gh = bpsk_oracle(Quantity::Ncmmse, 0.0, 1.0, 1.0, 64).unwrap().value;
    let independent = bpsk_mmse_simpson(1.0);
    let at = |j| s.ncmmse_at(n, j, 1.0).unwrap();
    let first = at(0);
    let spread_ok = (0..=n).all(|j| {
        let e = at(j);
        (e.mean - first.mean).abs() <= 3.0 * (e.se * e.se + first.se * first.se).sqrt() + 1e-12
    });
    let worst = (0..=n).map(|j| rel(at(j).mean, gh)).fold(0.0, f64::max);
    outcome(
        worst <= 0.02 && spread_ok && (gh - independent).abs() < 1e-8,
        format!("ncmmse(T,s,1) = {:.5} (se {:.4}), GH oracle {gh:.6}, Simpson {independent:.6}; max rel dev {worst:.2e}; constant in s: {spread_ok}", first.mean, first.se),
    )
}

fn c7() -> Outcome {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let none = CatalogOverrides::default();
    let modulated = catalog_entry("modulated-bpsk", &none).unwrap();
    let awgn = catalog_entry("awgn-bpsk", &none).unwrap();
    let mut max_diff: f64 = 0.0;
    for rep in 0..100 {
        let x = sample_input(&modulated.input, &grid, SEED, rep).unwrap();
        let y = simulate_output(&modulated.system, &x, 1.0, &NoiseBundle::generate(&grid, SEED, rep), &grid).unwrap();
        let z = z_transform(&modulated.system, &y).unwrap();
        let a = causal_posterior(&modulated.system, &modulated.input, &y, 1.0).unwrap();
        let b = causal_posterior(&awgn.system, &awgn.input, z.path(), 1.0).unwrap();
        for k in 0..=grid.n_steps() {
            let (da, db) = (a.distribution(k).unwrap(), b.distribution(k).unwrap());
            for (p, q) in da.iter().zip(&db) {
                max_diff = max_diff.max((p - q).abs());
            }
        }
    }
    let sa = run_ensemble(&spec("modulated-bpsk", 50, vec![0.5, 1.0], 2000)).unwrap().surface();
    let sb = run_ensemble(&spec("awgn-bpsk", 50, vec![0.5, 1.0], 2000)).unwrap().surface();
    let mut surface_ok = true;
    for (ca, cb) in sa.cmmse.iter().zip(&sb.cmmse).chain(sa.ncmmse.iter().zip(&sb.ncmmse)) {
        for (a, b) in ca.iter().zip(cb) {
            surface_ok &= (a.mean - b.mean).abs() <= 3.0 * (a.se * a.se + b.se * b.se).sqrt() + 1e-12;
        }
    }
    outcome(max_diff <= 1e-10 && surface_ok, format!("max posterior difference {max_diff:.2e} over 100 replicates; surfaces within 3 combined SE: {surface_ok}"))
}

fn c8() -> Outcome {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let expected = [
        ("awgn-gauss", SnrClass::StrongSnr),
        ("awgn-bpsk", SnrClass::StrongSnr),
        ("telegraph-awgn", SnrClass::StrongSnr),
        ("modulated-bpsk", SnrClass::StrongSnr),
        ("awgn-feedback", SnrClass::General),
        ("shifted-positive", SnrClass::StrongSnr),
    ];
    let mut ok = catalog().len() == expected.len();
    let mut parts = Vec::new();
    for (id, want) in expected {
        let entry = catalog_entry(id, &CatalogOverrides::default()).unwrap();
        let rep = classify_system(&entry.system, &entry.input, &grid, SEED).unwrap();
        // A violation on a system that truly has the class would be a false
        // counterexample; the non-anticipativity probe must pass everywhere.
        let false_cex = if want == SnrClass::StrongSnr { rep.evidence.iter().map(|p| p.violations).sum() } else { 0 };
        let anticipation_ok = rep.evidence.iter().filter(|p| p.name == "non_anticipativity").all(|p| p.passed);
        ok &= rep.verdict == want && false_cex == 0 && anticipation_ok;
        parts.push(format!("{id}={:?}", rep.verdict));
    }
    outcome(ok, parts.join(", "))
}

fn c9() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for id in ["awgn-gauss", "awgn-bpsk"] {
        let ens = run_ensemble(&spec(id, 200, vec![0.5, 1.0], 10_000)).unwrap();
        for r in [0.5, 1.0] {
            let m = ens.martingale(r).unwrap();
            let pass = (m.mean - 1.0).abs() <= 3.0 * m.se;
            ok &= pass;
            parts.push(format!("{id} r={r}: {:.4} (se {:.4})", m.mean, m.se));
        }
    }
    outcome(ok, parts.join("; "))
}

fn c10() -> Outcome {
    let entry = catalog_entry("awgn-feedback", &CatalogOverrides::default()).unwrap();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let class = classify_system(&entry.system, &entry.input, &grid, SEED).unwrap().verdict;
    let ens = run_ensemble(&spec("awgn-feedback", 100, vec![0.5, 1.0, 1.5], 2000)).unwrap();
    let rep = ens.residuals(class, Tolerances::default());
    let d = rep.family(Family::Duncan);
    let g = rep.family(Family::Gsv);
    let worst = d.worst().map(|w| w.residual.abs()).unwrap_or(f64::NAN);
    let gsv = g.entries.first().map(|e| e.residual).unwrap_or(f64::NAN);
    outcome(
        class == SnrClass::General && d.passed && g.diagnostic && gsv.is_finite(),
        format!("class {class:?}; duncan max |residual| {worst:.2e}; gsv residual {gsv:.3e} reported as diagnostic"),
    )
}

/// Smoothing marginals by summing over all `2^{N+1}` state sequences, with the
/// Gaussian increment likelihood written out directly.
fn enumerate_telegraph(y: &Path, r: f64, rate: f64) -> Vec<[f64; 2]> {
    let yv = y.values();
    let n = yv.len() - 1;
    let dt = y.grid().dt();
    let stay_switch = (-2.0 * rate * dt).exp();
    let p_switch = 0.5 * (1.0 - stay_switch);
    let states = [1.0, -1.0];
    let mut joint = Vec::with_capacity(1 << (n + 1));
    for code in 0u32..(1 << (n + 1)) {
        let s = |j: usize| ((code >> j) & 1) as usize;
        let mut lp = 0.5f64.ln();
        for j in 0..n {
            lp += if s(j) == s(j + 1) { (1.0 - p_switch).ln() } else { p_switch.ln() };
            let d = yv[j + 1] - yv[j] - r.sqrt() * states[s(j)] * dt;
            lp -= d * d / (2.0 * dt);
        }
        joint.push(lp);
    }
    let m = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = joint.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut out = vec![[0.0; 2]; n + 1];
    for (code, wi) in w.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            o[(code >> j) & 1] += wi / z;
        }
    }
    out
}

fn c11() -> Outcome {
    let grid = TimeGrid::new(1.0, 8).unwrap();
    let sys = catalog_entry("telegraph-awgn", &CatalogOverrides::default()).unwrap().system;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut max_diff: f64 = 0.0;
    for rep in 0..20 {
        let rate = 0.1 + 5.0 * rng.random::<f64>();
        let r = 0.1 + 5.0 * rng.random::<f64>();
        let input = InputModel::telegraph(rate);
        let x = sample_input(&input, &grid, SEED, rep).unwrap();
        let y = simulate_output(&sys, &x, r, &NoiseBundle::generate(&grid, SEED, rep), &grid).unwrap();
        let fb = smoothed_posterior(&sys, &input, &y, r, 8).unwrap();
        let here = enumerate_telegraph(&y, r, rate);
        let library = telegraph_bruteforce(&sys, &input, &y, r).unwrap();
        for j in 0..=8 {
            let d = fb.distribution(j).unwrap();
            for i in 0..2 {
                max_diff = max_diff.max((d[i] - here[j][i]).abs()).max((library[j][i] - here[j][i]).abs());
            }
        }
    }
    outcome(max_diff <= 1e-10, format!("max difference {max_diff:.2e} over 20 instances"))
}

fn c12() -> Outcome {
    let base = tempfile::tempdir().unwrap();
    let mut digests = Vec::new();
    for workers in [1usize, 2, 8] {
        let config = ExperimentConfig {
            system_id: "telegraph-awgn".into(),
            grid: GridConfig { horizon: 1.0, n_steps: 40 },
            r_grid: vec![0.5, 1.0, 2.0],
            replicates: 500,
            master_seed: SEED,
            output_dir: base.path().join(format!("w{workers}")),
            workers: Some(workers),
            ..Default::default()
        };
        cmd_run(&config, true).unwrap();
        let files: Vec<Vec<u8>> =
            ["mmse_surface.csv", "info_curve.csv"].iter().map(|f| fs::read(config.output_dir.join(f)).unwrap()).collect();
        digests.push(files);
    }
    let same = digests.windows(2).all(|w| w[0] == w[1]);
    outcome(same, format!("CSV outputs under 1, 2 and 8 workers identical: {same}"))
}

fn main() {
    let start = Instant::now();
    let gauss = run_ensemble(&spec("awgn-gauss", 200, vec![1.0], 10_000)).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let (c1, c2) = c1_c2(&gauss, seconds);
    let (c3, c4) = c3_c4();
    let results = [
        ("Duncan identity, Gaussian", c1),
        ("CMMSE closed form", c2),
        ("GSV identity", c3),
        ("time-averaged CMMSE/NCMMSE", c4),
        ("instantaneous identities", c5(&gauss)),
        ("BPSK oracle agreement", c6()),
        ("modulation invariance", c7()),
        ("classification", c8()),
        ("martingale normalization", c9()),
        ("feedback diagnostic", c10()),
        ("smoothing oracle", c11()),
        ("determinism", c12()),
    ];
    let mut failed = Vec::new();
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {:>2} {:<28} {}  {}", i + 1, name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", results.len());
}
