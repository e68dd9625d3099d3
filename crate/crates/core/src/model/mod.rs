//! Generator, discriminator and their building blocks.

mod batch;
mod checkpoint;
mod config;
mod discriminator;
mod generator;
pub mod layers;

pub use batch::Batch;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{ActivationKind, EncoderKind, ModelConfig, Readout};
pub use discriminator::{Discriminator, DiscriminatorOutput};
pub use generator::{Generator, GeneratorOutput, PredictionSet};

use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("bad input: {0}")]
    Data(String),
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
