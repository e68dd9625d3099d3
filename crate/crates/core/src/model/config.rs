use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::tensor::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Lstm,
    Transformer,
}

/// Which transformer position becomes the sequence summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Last,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    LeakyRelu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub use_labels: bool,
    /// Also feed the one-hot into the spatial embedding alongside (x, y).
    pub class_in_spatial: bool,
    pub embed_dim: usize,
    pub class_embed_dim: usize,
    pub hidden_dim: usize,
    pub noise_dim: usize,
    pub mlp_dim: usize,
    pub pool_dim: usize,
    pub transformer_heads: usize,
    pub transformer_layers: usize,
    pub transformer_ff_dim: usize,
    pub transformer_readout: Readout,
    pub activation: ActivationKind,
    pub leaky_slope: f64,
    pub k_samples: usize,
    /// Pixels per network unit for displacement inputs and outputs.
    pub coord_scale: f64,
    pub t_obs: usize,
    pub t_pred: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderKind::Lstm,
            use_labels: true,
            class_in_spatial: true,
            embed_dim: 16,
            class_embed_dim: 16,
            hidden_dim: 32,
            noise_dim: 8,
            mlp_dim: 64,
            pool_dim: 32,
            transformer_heads: 4,
            transformer_layers: 4,
            transformer_ff_dim: 64,
            transformer_readout: Readout::Last,
            activation: ActivationKind::LeakyRelu,
            leaky_slope: Activation::DEFAULT_LEAKY_SLOPE,
            k_samples: 20,
            coord_scale: 10.0,
            t_obs: 8,
            t_pred: 12,
        }
    }
}

impl ModelConfig {
    pub fn activation(&self) -> Activation {
        match self.activation {
            ActivationKind::Relu => Activation::Relu,
            ActivationKind::LeakyRelu => Activation::LeakyRelu(self.leaky_slope),
        }
    }

    /// Width of the per-step embedding fed to the encoder.
    pub fn step_embed_dim(&self) -> usize {
        if self.use_labels {
            self.embed_dim + self.class_embed_dim
        } else {
            self.embed_dim
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(ModelError::Config(m));
        for (name, v) in [
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("mlp_dim", self.mlp_dim),
            ("pool_dim", self.pool_dim),
            ("t_obs", self.t_obs),
            ("t_pred", self.t_pred),
        ] {
            if v == 0 {
                return err(format!("{name} must be positive"));
            }
        }
        if self.use_labels && self.class_embed_dim == 0 {
            return err("class_embed_dim must be positive when use_labels".into());
        }
        if self.k_samples < 1 {
            return err("k_samples must be >= 1".into());
        }
        if self.t_obs < 2 {
            return err("t_obs must be >= 2 to define an observed displacement".into());
        }
        if !(self.coord_scale > 0.0 && self.coord_scale.is_finite()) {
            return err(format!("coord_scale must be positive, got {}", self.coord_scale));
        }
        if !(0.0..=1.0).contains(&self.leaky_slope) {
            return err(format!("leaky_slope must lie in [0, 1], got {}", self.leaky_slope));
        }
        if self.encoder == EncoderKind::Transformer {
            if self.transformer_heads == 0 || self.transformer_layers == 0 {
                return err("transformer needs at least one head and one layer".into());
            }
            if !self.hidden_dim.is_multiple_of(self.transformer_heads) {
                return err(format!(
                    "hidden_dim {} not divisible by transformer_heads {}",
                    self.hidden_dim, self.transformer_heads
                ));
            }
            if self.transformer_ff_dim == 0 {
                return err("transformer_ff_dim must be positive".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ModelConfig::default().validate().unwrap();
        ModelConfig {
            encoder: EncoderKind::Transformer,
            ..ModelConfig::default()
        }
        .validate()
        .unwrap();
    }

    #[test]
    fn heads_must_divide_hidden() {
        let c = ModelConfig {
            encoder: EncoderKind::Transformer,
            hidden_dim: 30,
            ..ModelConfig::default()
        };
        assert!(matches!(c.validate(), Err(ModelError::Config(m)) if m.contains("divisible")));
    }

    #[test]
    fn k_must_be_positive() {
        let c = ModelConfig {
            k_samples: 0,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
