//! Reproducibility record written next to every run's outputs.

use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub command: &'a str,
    pub argv: &'a [String],
    pub seed: u64,
    pub version: String,
    pub config: &'a RunConfig,
}

pub fn version_string() -> String {
    format!("{} {} ({})", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"), env!("STIG_GIT_REV"))
}

pub fn write_run_record(dir: &Path, command: &str, argv: &[String], cfg: &RunConfig) -> Result<()> {
    let rec = RunRecord {
        command,
        argv,
        seed: cfg.seed,
        version: version_string(),
        config: cfg,
    };
    let path = dir.join("run.json");
    let text = serde_json::to_string_pretty(&rec).expect("run record serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}
