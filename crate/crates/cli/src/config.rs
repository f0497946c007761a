//! Run configuration file: one JSON object with `gen`, `model`, `train`,
//! `sample` and `eval` sections. Every key is optional; unknown keys are
//! rejected. Command-line flags override file values.

use std::fs;
use std::path::Path;

use anyhow::Context;
use gridflow_core::eval::{CFG_SWEEP, STEPS_SWEEP, TEST_COUNT};
use gridflow_core::flow::{ModelConfig, Prediction, TrainConfig};
use gridflow_core::sampler::SampleConfig;
use serde::{Deserialize, Serialize};

pub const RESOLVED_NAME: &str = "run_config.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gen: GenSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSection {
    pub task: Option<String>,
    pub level: Option<String>,
    pub count: usize,
    pub seed: u64,
    pub cell_px: usize,
}

impl Default for GenSection {
    fn default() -> Self {
        GenSection { task: None, level: None, count: 100, seed: 1, cell_px: 16 }
    }
}

/// Architecture knobs; the image size comes from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Patch side in pixels; defaults to the dataset's cell size.
    pub patch: Option<usize>,
    pub dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub time_dim: usize,
    pub prediction: Prediction,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::small(16, 16, 16);
        ModelSection {
            patch: None,
            dim: m.dim,
            depth: m.depth,
            heads: m.heads,
            mlp_ratio: m.mlp_ratio,
            time_dim: m.time_dim,
            prediction: m.prediction,
        }
    }
}

impl ModelSection {
    pub fn resolve(&self, height: usize, width: usize, cell_px: usize) -> ModelConfig {
        ModelConfig {
            channels: 3,
            height,
            width,
            patch: self.patch.unwrap_or(cell_px),
            dim: self.dim,
            depth: self.depth,
            heads: self.heads,
            mlp_ratio: self.mlp_ratio,
            time_dim: self.time_dim,
            prediction: self.prediction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Size of a generated test set.
    pub count: usize,
    pub best_of: usize,
    pub steps_list: Vec<usize>,
    pub cfg_list: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            count: TEST_COUNT,
            best_of: 1,
            steps_list: STEPS_SWEEP.to_vec(),
            cfg_list: CFG_SWEEP.to_vec(),
            sizes: vec![64, 512, 4096],
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("config {}", path.display()))
    }

    /// Write the resolved configuration into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join(RESOLVED_NAME), text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_all_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"gen": {"tasks": "vsp"}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"optimizer": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"learning_rate": 0.1}}"#).is_err());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = RunConfig::from_json(r#"{"train": {"lr": 0.001, "mu": -2}, "sample": {"steps": 5}}"#).unwrap();
        assert_eq!(c.train.lr, 0.001);
        assert_eq!(c.train.mu, -2.0);
        assert_eq!(c.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(c.sample.steps, 5);
        assert_eq!(c.sample.cfg_scale, 4.0);
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c = RunConfig::default();
        c.gen.task = Some("maze".into());
        c.eval.cfg_list = vec![1.0, 4.0];
        let dir = tempfile::tempdir().unwrap();
        c.write_resolved(dir.path()).unwrap();
        assert_eq!(RunConfig::load(&dir.path().join(RESOLVED_NAME)).unwrap(), c);
    }
}
