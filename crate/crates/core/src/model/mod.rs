//! Space-time-feature transformer and its divided space-time ablation.

mod config;
mod forward;
mod params;

pub use config::{ModelConfig, Residual, Variant, PRESETS};
pub use forward::{
    attend, constants, embed_patches, encoder_block, feature_attention, forward, head, leaves, predict,
    spatial_attention, temporal_attention, Attended,
};
pub use params::{count_params, param_shapes, Attention, Layer, ModelParams, Norm, ParamBreakdown, EMBED_INIT_STD};

use std::path::{Path, PathBuf};

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tensor::Tensor;

/// A configuration with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    pub config: ModelConfig,
    pub params: ModelParams<Tensor<S>>,
}

impl<S: Scalar> Model<S> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, seed)?;
        Ok(Self { config, params })
    }

    /// Victory probabilities for player 1, one per batch row.
    pub fn predict(&self, x: &Tensor<S>) -> Result<Vec<S>> {
        predict(&self.config, &self.params, x)
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    /// Sidecar path holding the JSON config next to a checkpoint.
    pub fn config_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Write the checkpoint container at `path` and the config as JSON at
    /// [`Model::config_path`].
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.params.to_map())?;
        let cfg_path = Self::config_path(path);
        let json = serde_json::to_string_pretty(&self.config).expect("config serialises");
        std::fs::write(&cfg_path, json + "\n").map_err(|e| Error::io(&cfg_path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg_path = Self::config_path(path);
        let text = std::fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        let config: ModelConfig =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", cfg_path.display())))?;
        let params = ModelParams::from_map(&config, &checkpoint::load(path)?)?;
        Ok(Self { config, params })
    }
}
