use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, Result};
use crate::data::{SynthSpec, WindowConfig};
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Generated scenes described by `data.synth`.
    Synthetic,
    /// Drone-dataset annotation tree under `data.root`.
    Sdd,
    /// Windows CSV written by `parse`.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    /// Annotation root for `sdd`; the data-root environment variable overrides it.
    pub root: Option<PathBuf>,
    /// Windows file for `csv`.
    pub csv: Option<PathBuf>,
    pub window: WindowConfig,
    pub synth: SynthSpec,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Synthetic,
            root: None,
            csv: None,
            window: WindowConfig::default(),
            synth: SynthSpec::default(),
            split_seed: 0,
        }
    }
}

/// One experiment: data, model, optimizer and where results go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub out: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            out: PathBuf::from("runs/default"),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// Applies `section.key=value` overrides. Values are read as TOML and
    /// fall back to plain strings.
    pub fn with_overrides(&self, sets: &[String]) -> Result<Self> {
        if sets.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Table::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        for s in sets {
            let (key, raw) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {s:?} is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let parts: Vec<&str> = key.trim().split('.').collect();
            let (last, path) = parts.split_last().expect("split yields one part");
            let mut table = &mut root;
            for p in path {
                table = table
                    .get_mut(*p)
                    .and_then(|v| v.as_table_mut())
                    .ok_or_else(|| CliError::Config(format!("unknown config section {p:?} in {key:?}")))?;
            }
            table.insert(last.to_string(), value);
        }
        root.try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        let w = &self.data.window;
        if self.data.source != DataSource::Synthetic && (w.t_obs, w.t_pred) != (self.model.t_obs, self.model.t_pred) {
            return Err(CliError::Config(format!(
                "data.window horizons {}+{} differ from model horizons {}+{}",
                w.t_obs, w.t_pred, self.model.t_obs, self.model.t_pred
            )));
        }
        let s = &self.data.synth;
        if self.data.source == DataSource::Synthetic && (s.t_obs, s.t_pred) != (self.model.t_obs, self.model.t_pred) {
            return Err(CliError::Config(format!(
                "data.synth horizons {}+{} differ from model horizons {}+{}",
                s.t_obs, s.t_pred, self.model.t_obs, self.model.t_pred
            )));
        }
        Ok(())
    }
}
