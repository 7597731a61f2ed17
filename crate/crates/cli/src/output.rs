//! CSV series, coefficient snapshots and the metadata sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use kfp_core::{CoefficientField, EnergyRecord};
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    #[default]
    Csv,
    Bin,
}

pub const TRAJECTORY_HEADER: &str = "t,half_l2_eta_sq,dissipation_A,dissipation_visc,forcing_power,energy_residual";

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Rust's shortest round-trip formatting, so equal bits give equal text.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn trajectory_csv(records: &[EnergyRecord]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.t),
            num(r.half_l2_eta_sq),
            num(r.dissipation_a),
            num(r.dissipation_visc),
            num(r.forcing_power),
            num(r.energy_residual)
        );
    }
    out
}

/// `index,alpha_1,…,alpha_d`, one line per basis function in storage order.
pub fn basis_order_csv(c: &CoefficientField) -> String {
    let d = c.indexer().dim();
    let mut out = String::from("index");
    for i in 1..=d {
        let _ = write!(out, ",alpha_{i}");
    }
    out.push('\n');
    for (j, alpha) in c.indexer().order().iter().enumerate() {
        let _ = write!(out, "{j}");
        for &a in alpha.as_slice() {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
    }
    out
}

/// Grid node coordinates in storage order: `node,x_1,…,x_d`.
pub fn grid_csv(c: &CoefficientField) -> String {
    let grid = c.grid();
    let mut out = String::from("node");
    for i in 1..=grid.dim() {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for idx in 0..grid.len() {
        let _ = write!(out, "{idx}");
        for x in grid.node(idx) {
            let _ = write!(out, ",{}", num(x));
        }
        out.push('\n');
    }
    out
}

/// Write one snapshot: coefficient index major, grid node minor. CSV has one
/// line per coefficient; binary is the same order as little-endian f64.
pub fn write_snapshot(dir: &Path, step: usize, c: &CoefficientField, format: SnapshotFormat) -> Result<PathBuf, CliError> {
    let npts = c.grid().len();
    match format {
        SnapshotFormat::Csv => {
            let path = dir.join(format!("step_{step:08}.csv"));
            let mut out = String::with_capacity(c.data().len() * 24);
            for row in c.data().chunks(npts) {
                let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            write_file(&path, out)?;
            Ok(path)
        }
        SnapshotFormat::Bin => {
            let path = dir.join(format!("step_{step:08}.bin"));
            let bytes: Vec<u8> = c.data().iter().flat_map(|v| v.to_le_bytes()).collect();
            write_file(&path, bytes)?;
            Ok(path)
        }
    }
}

#[derive(Serialize)]
pub struct Metadata<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_seconds: f64,
    /// Fully resolved configuration, re-runnable as is.
    pub config: toml::Value,
    pub details: serde_json::Value,
}

pub fn write_metadata(dir: &Path, meta: &Metadata<'_>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    write_file(&dir.join("metadata.json"), text)
}
