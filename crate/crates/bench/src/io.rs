//! Output directory layout, matrix CSV files and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::BenchmarkConfig;
use crate::error::BenchError;

pub const DATA_FILE: &str = "data.csv";
pub const GAIN_FILE: &str = "K.csv";
pub const LYAPUNOV_FILE: &str = "P.csv";
pub const CERTIFICATE_FILE: &str = "certificate.txt";

pub fn omega_file(agent: usize) -> String {
    format!("omega_{}.csv", agent + 1)
}

/// Output directory of one run.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, BenchError> {
        fs::create_dir_all(root).map_err(|e| BenchError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), BenchError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| BenchError::io(&path, e))
    }

    pub fn read(&self, name: &str) -> Result<String, BenchError> {
        let path = self.path(name);
        fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))
    }

    pub fn write_matrix(&self, name: &str, m: &DMatrix<f64>) -> Result<(), BenchError> {
        self.write(name, &matrix_to_csv(m))
    }

    pub fn read_matrix(&self, name: &str) -> Result<DMatrix<f64>, BenchError> {
        matrix_from_csv(&self.read(name)?).map_err(|message| BenchError::Parse { path: self.path(name), message })
    }
}

/// One row per matrix row, no header. Values are written in the shortest
/// form that parses back to the same `f64`.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("ASCII output")
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>, String> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| e.to_string())?;
        rows.push(record.iter().map(|c| c.trim().parse::<f64>().map_err(|_| format!("bad number `{c}`"))).collect::<Result<_, _>>()?);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix".into());
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Builds a CSV table from a header and rows of displayable cells.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("UTF-8 output")
}

/// Everything needed to rerun a command: the effective configuration
/// (seed and variant overrides already applied) and the files it wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub variant: String,
    pub outputs: Vec<String>,
    pub summary: BTreeMap<String, toml::Value>,
    pub config: BenchmarkConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &BenchmarkConfig) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.experiment.seed,
            variant: config.variant.name().to_string(),
            outputs: Vec::new(),
            summary: BTreeMap::new(),
            config: config.clone(),
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.toml")
    }

    pub fn summarize(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn write(&self, out: &OutDir) -> Result<(), BenchError> {
        let text = toml::to_string(self).map_err(|e| BenchError::Config(e.to_string()))?;
        out.write(&Self::file_name(&self.command), &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -1.0 / 3.0, 1e-300, 2.5e17, -0.0, std::f64::consts::PI]);
        let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
        assert_eq!(back.shape(), (2, 3));
        assert!(back.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn ragged_rejected() {
        assert!(matrix_from_csv("1,2\n3\n").is_err());
    }

    #[test]
    fn manifest_reloads_as_config() {
        let mut cfg = BenchmarkConfig::default();
        cfg.experiment.seed = 17;
        let mut m = Manifest::new("gen-data", &cfg);
        m.summarize("columns", 200);
        let text = toml::to_string(&m).unwrap();
        assert_eq!(BenchmarkConfig::from_toml(&text).unwrap(), cfg);
    }
}
