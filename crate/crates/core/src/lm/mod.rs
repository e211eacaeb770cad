//! Causal language-model backends: fine-tuning on a dataset file and
//! keyword-conditioned sampling with top-k and temperature.

mod char_model;
mod checkpoint;
mod finetune;
mod generate;
mod sampler;
pub mod testing;
mod vocab;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use char_model::{CharModel, ModelConfig};
pub use checkpoint::{CheckpointRef, CheckpointStore};
pub use finetune::{finetune, FineTuneOutcome};
pub use generate::{generate_text, Generation};
pub use sampler::{sample_token, top_k_filter, uniform_draw};
pub use vocab::CharVocab;

use crate::dataset::DatasetError;

/// Token id.
pub type Token = u32;

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("all logits are -inf")]
    NoViableToken,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: String, reason: String },
    #[error("backend: {0}")]
    Backend(String),
}

/// A causal language model that can be fine-tuned one batch at a time and
/// queried for next-token logits.
///
/// Inference takes `&self` and must be deterministic given weights and
/// context, so one loaded model can serve concurrent sampling.
pub trait ModelBackend: Send + Sync {
    fn vocab_size(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<Token>;
    fn decode(&self, tokens: &[Token]) -> String;
    fn end_token(&self) -> Token;
    /// Longest training sequence; longer examples are truncated.
    fn max_sequence_len(&self) -> usize;
    fn next_token_logits(&self, context: &[Token]) -> Result<Vec<f32>, LmError>;
    /// One optimizer step on `batch`; returns the mean loss.
    fn train_step(&mut self, batch: &[Vec<Token>], learning_rate: f64) -> Result<f64, LmError>;
    fn save(&self, dir: &Path) -> Result<(), LmError>;
}

fn default_steps() -> usize {
    20_000
}
fn default_batch_size() -> usize {
    1
}
fn default_learning_rate() -> f64 {
    3e-3
}
fn default_log_every() -> usize {
    100
}
fn default_checkpoint_every() -> usize {
    5_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineTuneConfig {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            steps: default_steps(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            log_every: default_log_every(),
            checkpoint_every: default_checkpoint_every(),
            seed: 0,
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        let bad = |m: &str| Err(LmError::InvalidConfig(m.to_string()));
        if self.steps < 1 {
            return bad("steps must be >= 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if self.log_every < 1 {
            return bad("log_every must be >= 1");
        }
        if self.checkpoint_every < 1 {
            return bad("checkpoint_every must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

fn default_temperature() -> f64 {
    0.9
}
fn default_top_k() -> usize {
    50
}
fn default_max_new_tokens() -> usize {
    120
}
fn default_n_samples() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: usize,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            temperature: default_temperature(),
            top_k: default_top_k(),
            max_new_tokens: default_max_new_tokens(),
            n_samples: default_n_samples(),
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        let bad = |m: &str| Err(LmError::InvalidConfig(m.to_string()));
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.top_k < 1 {
            return bad("top_k must be >= 1");
        }
        if self.n_samples < 1 {
            return bad("n_samples must be >= 1");
        }
        if self.max_new_tokens < 1 {
            return bad("max_new_tokens must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
}

/// Mean training loss logged every `log_every` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub log_every: usize,
    pub points: Vec<LossPoint>,
}

impl LossTrace {
    /// Steps strictly increasing at exactly `log_every` spacing.
    pub fn is_well_spaced(&self) -> bool {
        self.points
            .iter()
            .enumerate()
            .all(|(i, p)| p.step == (i + 1) * self.log_every && p.loss >= 0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.step, p.loss));
        }
        out
    }

    pub fn from_csv(text: &str, log_every: usize) -> Result<Self, LmError> {
        let points = text
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (s, v) = l
                    .split_once(',')
                    .ok_or_else(|| LmError::Backend(format!("bad loss row '{l}'")))?;
                Ok(LossPoint {
                    step: s.trim().parse().map_err(|e| LmError::Backend(format!("{e}")))?,
                    loss: v.trim().parse().map_err(|e| LmError::Backend(format!("{e}")))?,
                })
            })
            .collect::<Result<_, LmError>>()?;
        Ok(LossTrace { log_every, points })
    }
}
