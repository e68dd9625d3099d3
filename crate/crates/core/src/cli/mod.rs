//! Command-line surface: parse, train, eval and analyze runs with a
//! provenance manifest beside every output.

mod commands;
mod config;
mod manifest;

pub use commands::{
    class_histogram, cmd_analyze, cmd_eval, cmd_parse, cmd_train, load_split, ParseSummary, Split, TrainSummary,
};
pub use config::{DataConfig, DataSource, ExperimentConfig};
pub use manifest::{digest_annotation_tree, digest_file, hex_digest, FileDigest, Manifest, RunLock};

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::data::DataError;
use crate::eval::EvalError;
use crate::model::ModelError;
use crate::train::TrainError;

pub const DATA_ROOT_ENV: &str = "TRAJGAN_DATA_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("io: {0}")]
    Io(String),
    #[error("busy: {0}")]
    Busy(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// Process exit status: 2 config, 3 data, 4 numeric, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) | CliError::Busy(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) => CliError::Config(e.to_string()),
            ModelError::Tensor(_) => CliError::Numeric(e.to_string()),
            ModelError::Data(_) | ModelError::Unavailable(_) | ModelError::Checkpoint(_) => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Contract(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Config(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Eval(m) => m.into(),
            TrainError::Tensor(_) | TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            TrainError::Resume(_) => CliError::Other(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "trajgan", version, about = "Class-aware trajectory GAN: parse, train, evaluate, analyze")]
pub struct Cli {
    /// Root of the drone-dataset annotation tree.
    #[arg(long, global = true, env = DATA_ROOT_ENV)]
    pub data_root: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn an annotation tree into a windows CSV and print the class breakdown.
    Parse {
        /// Directory laid out as <scene>/<video>/annotations.txt; defaults to --data-root.
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Experiment config whose [data.window] section is used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train per the config; writes checkpoints, loss logs and a manifest.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override one key, e.g. --set train.lr=0.0005.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Min-of-k ADE/FDE of a checkpoint on one split, with baselines.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// PCA projection and pairwise distances of the class embeddings.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Loads `path` (or defaults) and applies overrides, seed and output dir.
pub fn resolve_config(
    path: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<ExperimentConfig> {
    let base = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = base.with_overrides(sets)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(o) = out {
        cfg.out = o.to_path_buf();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sibling(checkpoint: &Path, name: &str) -> PathBuf {
    checkpoint.parent().unwrap_or(Path::new(".")).join(name)
}

pub fn run(cli: Cli) -> Result<()> {
    let root = cli.data_root.as_deref();
    match cli.command {
        Command::Parse { input, out, config } => {
            let input = input
                .or_else(|| root.map(Path::to_path_buf))
                .ok_or_else(|| CliError::Config(format!("no input directory given and {DATA_ROOT_ENV} is unset")))?;
            let cfg = resolve_config(config.as_deref(), &[], None, None)?;
            let summary = cmd_parse(&input, &out, &cfg.data.window)?;
            println!("{}", summary.render());
        }
        Command::Train { config, seed, out, sets } => {
            let cfg = resolve_config(config.as_deref(), &sets, seed, out.as_deref())?;
            println!("# resolved config\n{}", cfg.to_toml()?);
            let s = cmd_train(&cfg, root)?;
            println!(
                "trained {} steps over {} epochs; best val ADE {}; outputs in {}",
                s.steps,
                s.epochs,
                s.best_val_ade.map_or("-".into(), |v| format!("{v:.3}")),
                cfg.out.display()
            );
        }
        Command::Eval { checkpoint, config, split, k, seed, out, sets } => {
            let cfg = resolve_config(config.as_deref(), &sets, None, None)?;
            let out = out.unwrap_or_else(|| sibling(&checkpoint, "eval"));
            let reports = cmd_eval(&checkpoint, &cfg, root, split, k, seed.unwrap_or(cfg.train.seed), &out)?;
            println!("{}", crate::eval::render_table(&reports));
        }
        Command::Analyze { checkpoint, out } => {
            let out = out.unwrap_or_else(|| sibling(&checkpoint, "analysis"));
            let a = cmd_analyze(&checkpoint, &out)?;
            println!("class,pc1,pc2");
            for (c, p) in crate::data::ClassLabel::ALL.iter().zip(&a.pca.coords) {
                println!("{},{:.6},{:.6}", c.name(), p[0], p[1]);
            }
            println!("outputs in {}", out.display());
        }
    }
    Ok(())
}
