use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Discriminator, Generator, ModelConfig, ModelError, Result};
use crate::tensor::ParamSet;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

/// Serialized generator and discriminator weights plus the config needed
/// to rebuild them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    generator: Vec<NamedTensor>,
    discriminator: Vec<NamedTensor>,
}

fn dump(ps: &ParamSet) -> Vec<NamedTensor> {
    ps.iter()
        .map(|(name, t)| NamedTensor {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            values: t.values().to_vec(),
        })
        .collect()
}

fn restore(ps: &mut ParamSet, saved: &[NamedTensor], what: &str) -> Result<()> {
    if saved.len() != ps.len() {
        return Err(ModelError::Checkpoint(format!(
            "{what} has {} tensors, model expects {}",
            saved.len(),
            ps.len()
        )));
    }
    for s in saved {
        let id = ps
            .find(&s.name)
            .ok_or_else(|| ModelError::Checkpoint(format!("unknown {what} tensor {}", s.name)))?;
        let t = ps.get_mut(id);
        if t.shape() != s.shape.as_slice() || s.values.len() != t.len() {
            return Err(ModelError::Checkpoint(format!(
                "{what} tensor {} has shape {:?}, model expects {:?}",
                s.name,
                s.shape,
                t.shape()
            )));
        }
        t.values_mut().copy_from_slice(&s.values);
    }
    Ok(())
}

impl Checkpoint {
    pub fn capture(generator: &Generator, discriminator: &Discriminator) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: generator.config.clone(),
            generator: dump(&generator.params),
            discriminator: dump(&discriminator.params),
        }
    }

    pub fn restore(&self) -> Result<(Generator, Discriminator)> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "format version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        let mut g = Generator::new(self.config.clone(), 0)?;
        let mut d = Discriminator::new(self.config.clone(), 0)?;
        restore(&mut g.params, &self.generator, "generator")?;
        restore(&mut d.params, &self.discriminator, "discriminator")?;
        Ok((g, d))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        fs::write(path, json).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(v) => {
                return Err(ModelError::Checkpoint(format!(
                    "{}: format version {v} is not supported (expected {CHECKPOINT_VERSION})",
                    path.display()
                )))
            }
            None => {
                return Err(ModelError::Checkpoint(format!(
                    "{}: missing format_version",
                    path.display()
                )))
            }
        }
        serde_json::from_value(value).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }
}
