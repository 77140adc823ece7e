//! Result files: long-form CSV tables, JSON reports, the run manifest and
//! whitespace-separated plot series.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sdelab_core::{Ensemble, InfoCurve, MmseSurface};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const SURFACE_FILE: &str = "mmse_surface.csv";
pub const INFO_FILE: &str = "info_curve.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const IDENTITY_FILE: &str = "identity_report.json";
pub const CLASS_FILE: &str = "class_report.json";

pub const SURFACE_HEADER: [&str; 7] = ["t", "s", "r", "cmmse", "cmmse_se", "ncmmse", "ncmmse_se"];
pub const INFO_HEADER: [&str; 5] = ["r", "t", "estimator", "value", "se"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// One row per `(t, s, r)` cell with `s ≤ t`. The `cmmse` columns hold
/// `cmmse(s, r)`, so each row pairs the causal error at `s` with the
/// smoothed error at `s` given data up to `t`.
pub fn surface_csv(surface: &MmseSurface, r_grid: &[f64]) -> Vec<u8> {
    let grid = surface.grid;
    let n = grid.n_steps();
    let rows = r_grid.iter().flat_map(move |&r| {
        (0..=n).flat_map(move |k| {
            (0..=k).map(move |s| {
                let c = surface.cmmse_at(s, r).expect("requested r is a node");
                let nc = surface.ncmmse_at(k, s, r).expect("requested r is a node");
                vec![num(grid.time(k)), num(grid.time(s)), num(r), num(c.mean), num(c.se), num(nc.mean), num(nc.se)]
            })
        })
    });
    csv_bytes(&SURFACE_HEADER, rows)
}

/// Rows per requested `r`: `duncan`, `direct` and `compensator` at every grid
/// time, then `gsv` at the horizon when the curve carries it.
pub fn info_csv(curve: &InfoCurve, r_grid: &[f64]) -> Vec<u8> {
    let mut rows = Vec::new();
    let n = curve.times.len() - 1;
    for &r in r_grid {
        let i = curve.r_values.iter().position(|v| *v == r).expect("requested r is a node");
        let series = [("duncan", &curve.duncan[i]), ("direct", &curve.direct[i]), ("compensator", &curve.compensator[i])];
        for (name, values) in series {
            for (t, e) in curve.times.iter().zip(values) {
                rows.push(vec![num(r), num(*t), name.to_string(), num(e.mean), num(e.se)]);
            }
        }
        if let Some(g) = &curve.gsv {
            rows.push(vec![num(r), num(curve.times[n]), "gsv".into(), num(g[i].mean), num(g[i].se)]);
        }
    }
    csv_bytes(&INFO_HEADER, rows.into_iter())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub command: String,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AbortCounts {
    pub non_finite: usize,
    pub non_degenerate: usize,
    pub kept: usize,
}

impl AbortCounts {
    pub fn of(e: &Ensemble) -> Self {
        Self { non_finite: e.aborted_non_finite(), non_degenerate: e.aborted_non_degenerate(), kept: e.replicates() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageTiming>,
    pub aborted: Option<AbortCounts>,
    /// File name to SHA-256 hex digest, for every file written into the
    /// output directory.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    /// The existing manifest in `dir`, or a fresh one if there is none.
    pub fn open(dir: &Path, config: &ExperimentConfig) -> Self {
        let existing = fs::read_to_string(dir.join(MANIFEST_FILE)).ok().and_then(|t| serde_json::from_str::<RunManifest>(&t).ok());
        let mut m = existing.unwrap_or_else(|| RunManifest {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            stages: Vec::new(),
            aborted: None,
            files: BTreeMap::new(),
        });
        m.config = config.clone();
        m
    }

    pub fn stage(&mut self, command: &str, stage: &str, seconds: f64) {
        self.stages.push(StageTiming { command: command.into(), stage: stage.into(), seconds });
    }

    /// Re-digests every listed file plus `written`, then saves the manifest.
    pub fn save(&mut self, dir: &Path, written: &[&str]) -> Result<PathBuf, CliError> {
        for name in written {
            self.files.insert(name.to_string(), String::new());
        }
        let names: Vec<String> = self.files.keys().cloned().collect();
        for name in names {
            let path = dir.join(&name);
            if path.exists() {
                let digest = sha256_file(&path)?;
                self.files.insert(name, digest);
            } else {
                self.files.remove(&name);
            }
        }
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }
}

/// Raw string records of a CSV file with the expected header.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, CliError> {
    if !path.exists() {
        return Err(CliError::MissingResults(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found = r.headers().map_err(csv_err(path))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, format!("unexpected header {found:?}")),
        });
    }
    r.records().collect::<Result<Vec<_>, _>>().map_err(csv_err(path))
}

/// Blocks of two-column rows separated by two blank lines, each preceded by a
/// `#` comment naming it.
pub fn dat_bytes(blocks: &[(String, Vec<(String, String)>)]) -> Vec<u8> {
    let mut out = String::new();
    for (i, (label, rows)) in blocks.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!("# {label}\n"));
        for (x, y) in rows {
            out.push_str(&format!("{x} {y}\n"));
        }
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dat_blocks_are_separated() {
        let b = dat_bytes(&[("a".into(), vec![("1".into(), "2".into())]), ("b".into(), vec![])]);
        assert_eq!(String::from_utf8(b).unwrap(), "# a\n1 2\n\n\n# b\n");
    }

    #[test]
    fn csv_uses_lf() {
        let b = csv_bytes(&["x", "y"], vec![vec!["1".to_string(), "a,b".to_string()]].into_iter());
        assert_eq!(String::from_utf8(b).unwrap(), "x,y\n1,\"a,b\"\n");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 0.0, 2.5e10] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
