//! The four subcommands. Each writes its files single-threaded after the
//! computation finishes and then refreshes the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use sdelab_core::classify::classify_system_with_budget;
use sdelab_core::{run_ensemble, Ensemble, Family, IdentityResidualReport, SnrClass, SnrClassReport};

use crate::config::ExperimentConfig;
use crate::output::{self, AbortCounts, RunManifest};
use crate::CliError;

fn say(quiet: bool, line: impl AsRef<str>) {
    if !quiet {
        println!("{}", line.as_ref());
    }
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

fn classify(config: &ExperimentConfig) -> Result<SnrClassReport, CliError> {
    let entry = config.entry()?;
    Ok(classify_system_with_budget(&entry.system, &entry.input, &config.time_grid()?, config.master_seed, config.probe_budget)?)
}

fn ensemble(config: &ExperimentConfig) -> Result<Ensemble, CliError> {
    Ok(run_ensemble(&config.ensemble_spec()?)?)
}

fn timed<T>(f: impl FnOnce() -> Result<T, CliError>) -> Result<(T, f64), CliError> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64()))
}

#[derive(Debug)]
pub struct RunSummary {
    pub class: SnrClass,
    pub aborted: AbortCounts,
    pub files: Vec<PathBuf>,
}

/// Writes `mmse_surface.csv`, `info_curve.csv` and the manifest.
pub fn cmd_run(config: &ExperimentConfig, quiet: bool) -> Result<RunSummary, CliError> {
    let dir = &config.output_dir;
    let (class, t_class) = timed(|| classify(config))?;
    let (ens, t_ens) = timed(|| ensemble(config))?;
    let start = Instant::now();
    prepare_dir(dir)?;
    let surface = output::surface_csv(&ens.surface(), &config.r_grid);
    let info = output::info_csv(&ens.info_curve(class.verdict), &config.r_grid);
    output::write_bytes(&dir.join(output::SURFACE_FILE), &surface)?;
    output::write_bytes(&dir.join(output::INFO_FILE), &info)?;
    let aborted = AbortCounts::of(&ens);
    let mut manifest = RunManifest::open(dir, config);
    manifest.stage("run", "classify", t_class);
    manifest.stage("run", "ensemble", t_ens);
    manifest.stage("run", "write", start.elapsed().as_secs_f64());
    manifest.aborted = Some(aborted.clone());
    let mpath = manifest.save(dir, &[output::SURFACE_FILE, output::INFO_FILE])?;
    say(quiet, format!("{}: class {:?}, {} replicates kept, {} aborted", config.system_id, class.verdict, aborted.kept, aborted.non_finite + aborted.non_degenerate));
    let files = vec![dir.join(output::SURFACE_FILE), dir.join(output::INFO_FILE), mpath];
    for f in &files {
        say(quiet, format!("wrote {}", f.display()));
    }
    Ok(RunSummary { class: class.verdict, aborted, files })
}

#[derive(Debug, Serialize)]
struct IdentityFile<'a> {
    system_id: &'a str,
    aborted: &'a AbortCounts,
    #[serde(flatten)]
    report: &'a IdentityResidualReport,
}

#[derive(Debug)]
pub struct VerifySummary {
    pub report: IdentityResidualReport,
    pub path: PathBuf,
}

/// Writes `identity_report.json`. The caller maps a failed report to exit 1.
pub fn cmd_verify(config: &ExperimentConfig, quiet: bool) -> Result<VerifySummary, CliError> {
    let dir = &config.output_dir;
    let (class, t_class) = timed(|| classify(config))?;
    let (ens, t_ens) = timed(|| ensemble(config))?;
    let report = ens.residuals(class.verdict, config.tolerances);
    prepare_dir(dir)?;
    let aborted = AbortCounts::of(&ens);
    let path = dir.join(output::IDENTITY_FILE);
    output::write_json(&path, &IdentityFile { system_id: &config.system_id, aborted: &aborted, report: &report })?;
    let mut manifest = RunManifest::open(dir, config);
    manifest.stage("verify", "classify", t_class);
    manifest.stage("verify", "ensemble", t_ens);
    manifest.aborted = Some(aborted);
    manifest.save(dir, &[output::IDENTITY_FILE])?;
    for f in &report.families {
        let worst = f.worst().map(|w| format!("max |residual| {:.3e} (tol {:.3e})", w.residual.abs(), w.tolerance)).unwrap_or_else(|| "no points".into());
        let status = match (f.diagnostic, f.passed) {
            (true, _) => "diagnostic",
            (false, true) => "pass",
            (false, false) => "FAIL",
        };
        say(quiet, format!("{:<11} {:<10} {worst}", f.family.name(), status));
    }
    if !report.passed {
        eprintln!("failing identities: {}", report.failing().join(", "));
    }
    say(quiet, format!("wrote {}", path.display()));
    Ok(VerifySummary { report, path })
}

#[derive(Debug, Serialize)]
struct ClassFile<'a> {
    system_id: &'a str,
    probe_budget: usize,
    #[serde(flatten)]
    report: &'a SnrClassReport,
}

/// Writes `class_report.json`.
pub fn cmd_classify(config: &ExperimentConfig, quiet: bool) -> Result<SnrClassReport, CliError> {
    let dir = &config.output_dir;
    let (report, t_class) = timed(|| classify(config))?;
    prepare_dir(dir)?;
    let path = dir.join(output::CLASS_FILE);
    output::write_json(&path, &ClassFile { system_id: &config.system_id, probe_budget: config.probe_budget, report: &report })?;
    let mut manifest = RunManifest::open(dir, config);
    manifest.stage("classify", "classify", t_class);
    manifest.save(dir, &[output::CLASS_FILE])?;
    say(quiet, format!("{}: {:?}", config.system_id, report.verdict));
    for p in &report.evidence {
        say(quiet, format!("  {:<24} {} samples, {} violations", p.name, p.samples, p.violations));
    }
    say(quiet, format!("wrote {}", path.display()));
    Ok(report)
}

pub const CMMSE_DAT: &str = "cmmse_vs_t.dat";
pub const I_VS_R_DAT: &str = "i_vs_r.dat";
pub const II_VS_T_DAT: &str = "ii_vs_t.dat";
pub const RESIDUALS_DAT: &str = "residuals_vs_r.dat";

type Block = (String, Vec<(String, String)>);

/// Blocks keyed by first appearance of `key`, preserving row order.
fn group(rows: impl Iterator<Item = (String, (String, String))>) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    for (key, row) in rows {
        match blocks.iter_mut().find(|b| b.0 == key) {
            Some(b) => b.1.push(row),
            None => blocks.push((key, vec![row])),
        }
    }
    blocks
}

/// Series files from the CSVs (and the identity report if present). Values
/// are copied as text, so they match the tables exactly.
pub fn cmd_plotdata(config: &ExperimentConfig, quiet: bool) -> Result<Vec<PathBuf>, CliError> {
    let dir = &config.output_dir;
    let start = Instant::now();
    let surface = output::read_csv(&dir.join(output::SURFACE_FILE), &output::SURFACE_HEADER)?;
    let info = output::read_csv(&dir.join(output::INFO_FILE), &output::INFO_HEADER)?;

    let cmmse = group(surface.iter().filter(|r| r[0] == r[1]).map(|r| (format!("r = {}", &r[2]), (r[1].to_string(), r[3].to_string()))));
    let horizon = info.iter().map(|r| &r[1]).max_by(|a, b| parse(a).total_cmp(&parse(b))).map(str::to_string).unwrap_or_default();
    let i_vs_r = group(
        info.iter().filter(|r| r[1] == *horizon).map(|r| (format!("estimator = {}", &r[2]), (r[0].to_string(), r[3].to_string()))),
    );
    let ii_vs_t = group(info.iter().filter(|r| &r[2] == "duncan").map(|r| (format!("r = {}", &r[0]), (r[1].to_string(), r[3].to_string()))));

    let mut written = vec![(CMMSE_DAT, cmmse), (I_VS_R_DAT, i_vs_r), (II_VS_T_DAT, ii_vs_t)];
    let identity = dir.join(output::IDENTITY_FILE);
    if identity.exists() {
        written.push((RESIDUALS_DAT, residual_blocks(&identity)?));
    }
    let mut paths = Vec::new();
    let mut names = Vec::new();
    for (name, blocks) in &written {
        let path = dir.join(name);
        output::write_bytes(&path, &output::dat_bytes(blocks))?;
        say(quiet, format!("wrote {}", path.display()));
        paths.push(path);
        names.push(*name);
    }
    let mut manifest = RunManifest::open(dir, config);
    manifest.stage("plotdata", "write", start.elapsed().as_secs_f64());
    manifest.save(dir, &names)?;
    Ok(paths)
}

fn parse(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// `|residual|` against `r` for the families without a time coordinate.
fn residual_blocks(path: &Path) -> Result<Vec<Block>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let bad = |m: &str| CliError::Io { path: path.to_path_buf(), source: std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string()) };
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e.to_string()))?;
    let families = v["families"].as_array().ok_or_else(|| bad("no families"))?;
    let mut blocks = Vec::new();
    for name in [Family::Duncan, Family::Gsv, Family::Cor1].map(Family::name) {
        let Some(f) = families.iter().find(|f| f["family"] == name) else { continue };
        let rows = f["entries"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|e| Some((e["r"].as_f64()?, e["residual"].as_f64()?)))
            .map(|(r, res)| (format!("{r}"), format!("{}", res.abs())))
            .collect();
        blocks.push((format!("family = {name}"), rows));
    }
    Ok(blocks)
}
