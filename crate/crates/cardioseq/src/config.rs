//! Merged run configuration: one JSON file covers the generator, model,
//! training, and evaluation settings; command-line flags override individual
//! fields and every run snapshots its fully resolved configuration next to
//! its outputs.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use cardioseq_core::latent::LatentMode;
use cardioseq_core::model::{LossWeights, ModelConfig};
use cardioseq_core::optim::AdamConfig;
use cardioseq_core::toy::{ConditionRanges, DiseaseMix, ToyGeneratorParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainSettings,
    pub toy: ToyGeneratorParams,
    pub ranges: ConditionRanges,
    pub mix: DiseaseMix,
    pub eval: EvalSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub seed: u64,
    /// Extra checkpoint every N epochs (0 = final/best only).
    pub checkpoint_every: usize,
    /// Global-norm gradient clip; absent by default.
    pub grad_clip_norm: Option<f64>,
    /// Re-initialize the mesh decoder's output layer (zero weights, bias =
    /// train-split mean shape) so decoding starts from a plausible heart
    /// with the template's vertex-structure assignment intact.
    pub init_output_to_mean_shape: bool,
    pub optimizer: AdamConfig,
    pub loss: LossWeights,
    pub latent_mode: LatentMode,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            epochs: 300,
            seed: 0,
            checkpoint_every: 0,
            grad_clip_norm: None,
            init_output_to_mean_shape: true,
            optimizer: AdamConfig::default(),
            loss: LossWeights::default(),
            latent_mode: LatentMode::FrameMean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    /// Generated samples per real subject for distribution fidelity.
    pub samples_per_subject: usize,
    /// Histogram bins for the discrete KL divergence.
    pub kl_bins: usize,
    /// Number of age-quantile bins.
    pub age_bins: usize,
    /// Synthetic samples per subject for the deviation score.
    pub n_synth: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            samples_per_subject: 20,
            kl_bins: 20,
            age_bins: 10,
            n_synth: 100,
        }
    }
}

impl RunConfig {
    /// Loads a config file, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    /// Writes the resolved configuration next to a run's outputs.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating {}", out_dir.display()))?;
        let path = out_dir.join("resolved_config.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
