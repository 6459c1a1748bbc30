use serde::{Deserialize, Serialize};

use crate::crf::TagLoss;
use crate::error::{Error, Result};
use crate::text::{MAX_ARTICLE_TOKENS, MAX_SUMMARY_TOKENS};

/// What the global head pools over the summary positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Average the context vectors, then run the MLP.
    #[default]
    Mean,
    /// Run the MLP hidden layer per position and average its activations.
    HiddenMean,
}

/// Hyperparameters of the verification model and its training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HermanConfig {
    /// Per-direction LSTM width; encoder outputs are twice this.
    pub hidden: usize,
    pub embed: usize,
    /// Maximum vocabulary size including padding and unknown.
    pub vocab: usize,
    pub alpha: f64,
    pub lr: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub max_article: usize,
    pub max_summary: usize,
    pub seed: u64,
    pub loss_mode: TagLoss,
    pub patience: usize,
    pub max_epochs: usize,
    /// Independently seeded training runs; the lowest validation loss wins.
    pub restarts: usize,
    /// Width of the attention scoring layer; 0 means the same as `hidden`.
    pub attention_dim: usize,
    /// Width of the embedding of the entity mask bit fed to the summary encoder.
    pub m_embed: usize,
    /// Feed the mask as an input embedding to the summary encoder.
    pub m_input: bool,
    /// Append the mask bit to the emission features.
    pub m_emission: bool,
    /// Hidden width of the emission head; 0 means a single linear projection.
    pub emission_hidden: usize,
    /// Hidden width of the global head MLP.
    pub z_hidden: usize,
    pub z_pooling: Pooling,
}

impl Default for HermanConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            embed: 100,
            vocab: 50_000,
            alpha: 0.66,
            lr: 1e-3,
            clip_norm: 5.0,
            batch_size: 32,
            max_article: MAX_ARTICLE_TOKENS,
            max_summary: MAX_SUMMARY_TOKENS,
            seed: 0,
            loss_mode: TagLoss::Sequence,
            patience: 3,
            max_epochs: 30,
            restarts: 1,
            attention_dim: 0,
            m_embed: 8,
            m_input: true,
            m_emission: true,
            emission_hidden: 0,
            z_hidden: 256,
            z_pooling: Pooling::Mean,
        }
    }
}

impl HermanConfig {
    pub fn attention_width(&self) -> usize {
        if self.attention_dim == 0 {
            self.hidden
        } else {
            self.attention_dim
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        let dims = [
            ("hidden", self.hidden),
            ("embed", self.embed),
            ("batch_size", self.batch_size),
            ("max_article", self.max_article),
            ("max_summary", self.max_summary),
            ("m_embed", self.m_embed),
            ("z_hidden", self.z_hidden),
            ("max_epochs", self.max_epochs),
            ("restarts", self.restarts),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.vocab < 3 {
            return Err(Error::config("vocab must hold padding, unknown and at least one word"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(Error::config(format!("clip_norm must be positive, got {}", self.clip_norm)));
        }
        Ok(())
    }
}
