use std::path::{Path, PathBuf};

use anyhow::Context;
use music_embed::seqmodel::TrainConfig;
use music_embed::Variant;
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// t-SNE settings exposed on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSettings {
    pub dims: usize,
    pub perplexity: f64,
    pub iterations: usize,
}

impl Default for ProjectionSettings {
    fn default() -> Self {
        Self { dims: 2, perplexity: 15.0, iterations: 1000 }
    }
}

/// Everything a run depends on. A `--config` file holds this structure as
/// JSON; command-line flags override the values it sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub variant: Variant,
    /// `train.seed` is ignored; the top-level seed drives every stage.
    pub train: TrainConfig,
    pub projection: ProjectionSettings,
    pub queries: Vec<String>,
    pub k: usize,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            variant: Variant::Control,
            train: TrainConfig::default(),
            projection: ProjectionSettings::default(),
            queries: Vec::new(),
            k: 10,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }

    /// Checks values a file could set but the flag parser would have refused.
    pub fn validate(&mut self) -> Result<(), UsageError> {
        self.train.seed = self.seed;
        if !(2..=3).contains(&self.projection.dims) {
            return Err(UsageError(format!("projection dims must be 2 or 3, got {}", self.projection.dims)));
        }
        if self.k == 0 {
            return Err(UsageError("k must be positive".into()));
        }
        if !(self.projection.perplexity >= 2.0) {
            return Err(UsageError(format!("perplexity must be at least 2, got {}", self.projection.perplexity)));
        }
        if self.projection.iterations == 0 {
            return Err(UsageError("iterations must be positive".into()));
        }
        self.train.validate().map_err(|e| UsageError(e.to_string()))
    }
}
