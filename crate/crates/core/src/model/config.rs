use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QppError, Result};

/// Architecture of the groupwise predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_width: usize,
    pub max_positions: usize,
}

impl PredictorConfig {
    /// Four post-norm layers with a 4·d feed-forward block.
    pub fn new(d_model: usize, n_heads: usize, max_positions: usize) -> Self {
        Self {
            d_model,
            n_heads,
            n_layers: 4,
            ffn_width: 4 * d_model,
            max_positions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(QppError::Input(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_layers == 0 || self.ffn_width == 0 || self.max_positions == 0 {
            return Err(QppError::Input("layers, ffn width and positions must be >= 1".into()));
        }
        Ok(())
    }
}

/// The desk-scale trainable pair encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub token_dim: usize,
    pub max_pair_tokens: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            vocab_size: 1 << 15,
            token_dim: 32,
            max_pair_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub predictor: PredictorConfig,
    pub encoder: Option<EncoderConfig>,
}

/// Size presets. The full-scale presets mirror the group sizes that fit the
/// corresponding encoder size; the desk preset is for CPU experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelProfile {
    Desk,
    Small,
    Base,
    Large,
}

impl ModelProfile {
    pub fn group_size(self) -> usize {
        match self {
            ModelProfile::Desk => 8,
            ModelProfile::Small => 128,
            ModelProfile::Base => 64,
            ModelProfile::Large => 16,
        }
    }

    pub fn n_heads(self) -> usize {
        match self {
            ModelProfile::Desk => 4,
            _ => 8,
        }
    }
}

impl FromStr for ModelProfile {
    type Err = QppError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "desk" => ModelProfile::Desk,
            "small" => ModelProfile::Small,
            "base" => ModelProfile::Base,
            "large" => ModelProfile::Large,
            _ => return Err(QppError::Input(format!("unknown model profile '{s}'"))),
        })
    }
}
