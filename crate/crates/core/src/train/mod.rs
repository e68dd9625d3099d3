//! Losses, the alternating adversarial loop and the generator-only ablation.

mod log;
mod losses;
mod trainer;

pub use log::{EpochRecord, StepRecord, TrainLog};
pub use losses::{d_loss, g_adv_loss, variety_loss, LOG_FLOOR};
pub use trainer::{run_training, ResumeState, TrainOutcome, Trainer};

use serde::{Deserialize, Serialize};

use crate::eval::EvalError;
use crate::model::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Gan,
    Nogan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Windows per step; every agent of a window joins the batch.
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub k: usize,
    pub mode: TrainMode,
    pub d_steps: usize,
    pub g_steps: usize,
    pub seed: u64,
    pub clip_norm: Option<f64>,
    pub adv_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 48,
            lr: 1e-3,
            epochs: 200,
            k: 20,
            mode: TrainMode::Gan,
            d_steps: 1,
            g_steps: 1,
            seed: 0,
            clip_norm: None,
            adv_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.g_steps == 0 || (self.mode == TrainMode::Gan && self.d_steps == 0) {
            return bad("d_steps and g_steps must be positive".into());
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return bad(format!("clip_norm must be positive, got {c}"));
            }
        }
        if !(self.adv_weight >= 0.0 && self.adv_weight.is_finite()) {
            return bad(format!("adv_weight must be non-negative, got {}", self.adv_weight));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite {what} at step {step} (generator grad norm {grad_norm_g:.4e}, discriminator grad norm {grad_norm_d:.4e}); largest parameter gradients: {}", format_norms(.norms))]
    NonFinite {
        step: u64,
        what: &'static str,
        grad_norm_g: f64,
        grad_norm_d: f64,
        norms: Vec<(String, f64)>,
    },
    #[error("resume state: {0}")]
    Resume(String),
}

fn format_norms(norms: &[(String, f64)]) -> String {
    norms
        .iter()
        .map(|(n, v)| format!("{n}={v:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, TrainError>;
