//! Experiment orchestration: configuration, the five experiments and their
//! on-disk records (`manifest.json` plus CSV tables).

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

pub use config::{
    CascadeConfig, ClusterConfig, CouplingSpec, ExperimentConfig, ExperimentKind, HamiltonianConfig, HamiltonianKind,
    LmConfig, ModelConfig, NoiseConfig, OutputConfig, TrajectoryConfig,
};
pub use run::compute;

use crate::table::Table;

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical non-convergence: {0}")]
    NonConvergent(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ExpError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::NonConvergent(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

impl From<crate::Error> for ExpError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::NonConvergent { .. } => Self::NonConvergent(e.to_string()),
            other => Self::Validation(other.to_string()),
        }
    }
}

/// Tables and summary produced by one experiment, before anything is written.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// `(file name, table)`; the first entry is `<experiment>.csv`.
    pub tables: Vec<(String, Table)>,
    pub summary: Value,
    /// Non-convergence flags raised while computing; any flag makes the run exit with 3.
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableEntry {
    pub file: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub out_dir: PathBuf,
    pub manifest: Value,
    pub tables: Vec<TableEntry>,
    pub flags: Vec<String>,
}

impl ExperimentRecord {
    pub fn exit_code(&self) -> i32 {
        if self.flags.is_empty() {
            0
        } else {
            3
        }
    }
}

/// Validates `config`, runs `kind` and writes the manifest and tables into
/// `config.output.dir`.
pub fn run(kind: ExperimentKind, config: &ExperimentConfig) -> Result<ExperimentRecord, ExpError> {
    let mut config = config.clone();
    config.experiment = Some(kind);
    config.validate(kind)?;
    let start = Instant::now();
    let output = compute(kind, &config)?;
    let wall = start.elapsed().as_secs_f64();
    write_record(kind, &config, output, wall)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExpError {
    ExpError::Io(format!("{}: {e}", path.display()))
}

fn write_record(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    output: ExperimentOutput,
    wall_time: f64,
) -> Result<ExperimentRecord, ExpError> {
    let dir = &config.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut entries = Vec::new();
    for (name, table) in &output.tables {
        let path = dir.join(name);
        table.write_file(&path).map_err(|e| io_err(&path, e))?;
        entries.push(TableEntry {
            file: name.clone(),
            rows: table.len(),
            columns: table.header.clone(),
        });
    }
    let manifest = serde_json::json!({
        "artifact": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": kind.as_str(),
        "master_seed": config.master_seed,
        "config": config,
        "wall_time_s": wall_time,
        "tables": entries,
        "summary": output.summary,
        "flags": output.flags,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(ExperimentRecord {
        out_dir: dir.clone(),
        manifest,
        tables: entries,
        flags: output.flags,
    })
}

/// Re-parses the configuration embedded in a manifest.
pub fn config_from_manifest(manifest: &Value) -> Result<ExperimentConfig, ExpError> {
    let cfg = manifest
        .get("config")
        .ok_or_else(|| ExpError::Validation("manifest has no config".into()))?;
    serde_json::from_value(cfg.clone()).map_err(|e| ExpError::Validation(format!("manifest config: {e}")))
}
