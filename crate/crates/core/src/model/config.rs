use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which attention factorisation the encoder blocks use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Spatial, temporal and feature attention.
    #[default]
    Tstf,
    /// Spatial and temporal attention only (divided space-time).
    SpaceTimeOnly,
}

/// Residual and normalisation placement inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Residual {
    /// `LN(FA(TA(SA(z) + z)))`: one residual around SA, one LN at the end.
    #[default]
    Literal,
    /// `z + SA(LN(z))`, then `z + TA(LN(z))`, then `z + FA(LN(z))`.
    PreLn,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    /// Embedding width `D`.
    pub dim: usize,
    pub heads: usize,
    /// Feature planes `C`.
    pub channels: usize,
    /// Frames per input timeline `T`.
    pub frames: usize,
    pub patch: usize,
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub residual: Residual,
}

/// Named hyperparameter bundles.
pub const PRESETS: [&str; 4] = ["desk", "tstf-6", "tstf-8", "timesformer-12"];

impl ModelConfig {
    /// Workstation-scale default: 16×16 map, 8 frames, `D = 20`.
    pub fn desk() -> Self {
        Self {
            layers: 2,
            dim: 20,
            heads: 5,
            channels: 5,
            frames: 8,
            patch: 4,
            height: 16,
            width: 16,
            variant: Variant::Tstf,
            residual: Residual::Literal,
        }
    }

    /// Full-scale shape (`D = 155`, `T = 500`) with `layers` blocks.
    pub fn full_scale(layers: usize, variant: Variant) -> Self {
        Self {
            layers,
            dim: 155,
            frames: 500,
            variant,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "tstf-6" => Ok(Self::full_scale(6, Variant::Tstf)),
            "tstf-8" => Ok(Self::full_scale(8, Variant::Tstf)),
            "timesformer-12" => Ok(Self::full_scale(12, Variant::SpaceTimeOnly)),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    /// Training batch size listed for the full-scale presets; 2 for desk.
    pub fn preset_batch_size(name: &str) -> Option<usize> {
        match name {
            "desk" | "timesformer-12" => Some(2),
            "tstf-6" | "tstf-8" => Some(1),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.layers == 0 || self.dim == 0 || self.heads == 0 || self.channels == 0 || self.frames == 0 {
            return fail(format!("zero-sized model dimension in {self:?}"));
        }
        if self.patch == 0 || self.height % self.patch != 0 || self.width % self.patch != 0 {
            return fail(format!(
                "map {}×{} is not divisible into {}×{} patches",
                self.height, self.width, self.patch, self.patch
            ));
        }
        if self.dim % self.heads != 0 {
            return fail(format!("dim {} not divisible by heads {}", self.dim, self.heads));
        }
        if self.dim % self.channels != 0 {
            return fail(format!("dim {} not divisible by channels {}", self.dim, self.channels));
        }
        Ok(())
    }

    /// Patches per frame `N`.
    pub fn tokens_per_frame(&self) -> usize {
        (self.height / self.patch) * (self.width / self.patch)
    }

    /// `T·N + 1` including the cls token.
    pub fn seq_len(&self) -> usize {
        self.frames * self.tokens_per_frame() + 1
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    /// Channel-token width `d′ = D / C`.
    pub fn feature_dim(&self) -> usize {
        self.dim / self.channels
    }

    /// Flattened patch length `C·patch²`.
    pub fn patch_len(&self) -> usize {
        self.channels * self.patch * self.patch
    }

    pub fn hidden(&self) -> usize {
        4 * self.dim
    }

    pub fn has_feature_attention(&self) -> bool {
        self.variant == Variant::Tstf
    }

    /// LayerNorms over the patch tokens in each block.
    pub fn norms_per_layer(&self) -> usize {
        match (self.residual, self.variant) {
            (Residual::Literal, _) => 1,
            (Residual::PreLn, Variant::Tstf) => 3,
            (Residual::PreLn, Variant::SpaceTimeOnly) => 2,
        }
    }

    /// Expected input shape `[B, T, C, H, W]`.
    pub fn input_shape(&self, batch: usize) -> [usize; 5] {
        [batch, self.frames, self.channels, self.height, self.width]
    }
}
