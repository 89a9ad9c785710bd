use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use monovo::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: PathBuf,
    pub seq: String,
    pub depth: Option<PathBuf>,
    pub seed: u64,
    pub config: PipelineConfig,
    pub poses: PathBuf,
    pub decisions: PathBuf,
    pub frames: usize,
    pub threads: usize,
    pub duration_s: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{}: invalid manifest", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("{}", path.display()))
    }
}

/// Reads a TOML pipeline configuration; unknown keys are errors.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("{}: invalid configuration", path.display()))
}
