//! Result export: self-describing CSV tables, plain-text PGM heatmaps and
//! run manifests with output digests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::scenario::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed image {0}")]
    Image(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_parent(path: &Path) -> Result<(), ExportError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(())
}

/// Writes serializable rows with a header derived from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExportError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes a table given as a header and string rows.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), ExportError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads a CSV file into its header and string records.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), ExportError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

/// Writes a matrix of values in `[0, 1]` as a plain (P2) graymap, each cell
/// drawn as a `cell` x `cell` block; 1.0 maps to white.
pub fn write_pgm(path: &Path, matrix: &[Vec<f64>], cell: usize) -> Result<(), ExportError> {
    ensure_parent(path)?;
    let cell = cell.max(1);
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    let mut s = format!("P2\n{} {}\n255\n", cols * cell, rows * cell);
    for row in matrix {
        let line: Vec<String> = row
            .iter()
            .flat_map(|v| {
                let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                std::iter::repeat(g.to_string()).take(cell)
            })
            .collect();
        let line = line.join(" ");
        for _ in 0..cell {
            s.push_str(&line);
            s.push('\n');
        }
    }
    fs::write(path, s).map_err(io_err(path))
}

/// Parses a plain graymap into rows of gray levels.
pub fn read_pgm(path: &Path) -> Result<Vec<Vec<u8>>, ExportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut tok = text.split_whitespace();
    let bad = || ExportError::Image(path.display().to_string());
    if tok.next() != Some("P2") {
        return Err(bad());
    }
    let mut num = || -> Result<usize, ExportError> { tok.next().and_then(|t| t.parse().ok()).ok_or_else(bad) };
    let (w, h, _max) = (num()?, num()?, num()?);
    (0..h).map(|_| (0..w).map(|_| num().map(|v| v as u8)).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command invocation, enough to verify a rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub crate_version: String,
    pub scenario_path: Option<PathBuf>,
    pub scenario_hash: String,
    pub seeds: Vec<u64>,
    pub deterministic: bool,
    pub workers: usize,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub outputs: Vec<OutputFile>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn new(command: &str, scenario_path: Option<PathBuf>, scenario_hash: &str, seeds: Vec<u64>, deterministic: bool, workers: usize) -> Self {
        RunManifest {
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario_path,
            scenario_hash: scenario_hash.to_string(),
            seeds,
            deterministic,
            workers,
            started: unix_now(),
            finished: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Records an output file together with its digest.
    pub fn add_output(&mut self, path: &Path) -> Result<(), ExportError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        self.outputs.push(OutputFile {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Stamps the finish time and writes `run_manifest.json` into `dir`.
    pub fn finish(&mut self, dir: &Path) -> Result<PathBuf, ExportError> {
        self.finished = unix_now();
        let path = dir.join("run_manifest.json");
        ensure_parent(&path)?;
        fs::write(&path, serde_json::to_string_pretty(self)?).map_err(io_err(&path))?;
        Ok(path)
    }
}
