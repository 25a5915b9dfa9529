//! Run manifest: every command records its configuration, outputs and
//! timings before exiting, on success and on failure alike.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    /// "ok" or the error message
    pub status: String,
    pub artifacts: Vec<String>,
    pub timings_seconds: BTreeMap<String, f64>,
    pub nfe_total: u64,
}

/// Artifacts, timings and evaluation counts accumulated by a command.
#[derive(Default)]
pub struct Outcome {
    pub artifacts: Vec<String>,
    pub timings_seconds: BTreeMap<String, f64>,
    pub nfe_total: u64,
}

impl Outcome {
    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn timing(&mut self, name: &str, seconds: f64) {
        self.timings_seconds.insert(name.to_string(), seconds);
    }
}

pub fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(out_dir.join("run_manifest.json"), json)?;
    Ok(())
}
