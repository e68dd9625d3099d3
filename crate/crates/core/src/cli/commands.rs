use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use super::config::{DataSource, ExperimentConfig};
use super::manifest::{digest_annotation_tree, digest_file, hex_digest, write_file, FileDigest, Manifest, RunLock};
use super::{CliError, Result};
use crate::data::{
    build_windows, load_scene_dir, read_windows_csv, split_dataset, synth_scene, write_windows_csv, ClassLabel,
    ClassVocab, DatasetSplit, SceneTracks, SceneWindow, WindowConfig,
};
use crate::eval::{analyze_embeddings, constant_velocity_report, eval_min_of_k, svg, write_report_csv, EmbeddingAnalysis, EvalReport};
use crate::model::{Checkpoint, CHECKPOINT_VERSION};
use crate::train::run_training;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Val,
    Test,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Track counts per class with percentages of the total.
pub fn class_histogram(scenes: &[SceneTracks]) -> Vec<(ClassLabel, usize, f64)> {
    let mut counts = [0usize; ClassLabel::COUNT];
    for s in scenes {
        for t in &s.tracks {
            counts[t.class.index()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    ClassLabel::ALL
        .iter()
        .map(|&c| {
            let n = counts[c.index()];
            let pct = if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
            (c, n, pct)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseSummary {
    pub scenes: usize,
    pub tracks: usize,
    pub windows: usize,
    pub histogram: Vec<(ClassLabel, usize, f64)>,
}

impl ParseSummary {
    pub fn render(&self) -> String {
        let mut s = format!("{} scenes, {} tracks, {} windows\n", self.scenes, self.tracks, self.windows);
        let _ = writeln!(s, "{:<14} {:>8} {:>8}", "class", "tracks", "percent");
        for (c, n, p) in &self.histogram {
            let _ = writeln!(s, "{:<14} {:>8} {:>7.2}%", c.name(), n, p);
        }
        s
    }
}

fn load_tree(root: &Path, window: &WindowConfig) -> Result<(Vec<SceneTracks>, Vec<SceneWindow>)> {
    if !root.is_dir() {
        return Err(CliError::Data(format!(
            "{} is not a directory; expected <root>/<scene>/<video>/annotations.txt",
            root.display()
        )));
    }
    let scenes = load_scene_dir(root, &ClassVocab::default(), window.frame_step)?;
    let mut windows = Vec::new();
    for s in &scenes {
        windows.extend(build_windows(s, window)?);
    }
    Ok((scenes, windows))
}

/// Annotation tree to windows CSV, class histogram CSV and manifest.
pub fn cmd_parse(input: &Path, out: &Path, window: &WindowConfig) -> Result<ParseSummary> {
    let (scenes, windows) = load_tree(input, window)?;
    let histogram = class_histogram(&scenes);
    write_file(out, &csv_bytes(|b| write_windows_csv(b, &windows)))?;
    let hist_path = out.with_extension("classes.csv");
    let mut hist = String::from("class,tracks,percent\n");
    for (c, n, p) in &histogram {
        let _ = writeln!(hist, "{},{n},{p}", c.name());
    }
    write_file(&hist_path, hist.as_bytes())?;
    let mut m = Manifest::new("parse");
    m.config_sha256 = Some(hex_digest(
        serde_json::to_string(window).map_err(|e| CliError::Config(e.to_string()))?.as_bytes(),
    ));
    m.inputs = digest_annotation_tree(input)?;
    m.outputs = vec![out.display().to_string(), hist_path.display().to_string()];
    m.write(&out.with_extension("manifest.json"))?;
    Ok(ParseSummary {
        scenes: scenes.len(),
        tracks: scenes.iter().map(|s| s.tracks.len()).sum(),
        windows: windows.len(),
        histogram,
    })
}

/// Windows of the configured source, their input digests, and the split.
pub fn load_split(cfg: &ExperimentConfig, data_root: Option<&Path>) -> Result<(DatasetSplit, Vec<FileDigest>)> {
    let (windows, inputs) = match cfg.data.source {
        DataSource::Synthetic => (synth_scene(&cfg.data.synth)?, Vec::new()),
        DataSource::Sdd => {
            let root: PathBuf = data_root
                .map(Path::to_path_buf)
                .or_else(|| cfg.data.root.clone())
                .ok_or_else(|| CliError::Config("data.source = \"sdd\" needs data.root or --data-root".into()))?;
            let (_, w) = load_tree(&root, &cfg.data.window)?;
            (w, digest_annotation_tree(&root)?)
        }
        DataSource::Csv => {
            let path = cfg
                .data
                .csv
                .as_ref()
                .ok_or_else(|| CliError::Config("data.source = \"csv\" needs data.csv".into()))?;
            let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let w = read_windows_csv(BufReader::new(f)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            (w, vec![digest_file(path)?])
        }
    };
    Ok((split_dataset(windows, cfg.data.split_seed)?, inputs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: usize,
    pub epochs: usize,
    pub best_val_ade: Option<f64>,
}

/// Trains under an exclusive lock on `cfg.out` and writes the resolved
/// config, best and last checkpoints, loss CSVs and a manifest.
pub fn cmd_train(cfg: &ExperimentConfig, data_root: Option<&Path>) -> Result<TrainSummary> {
    cfg.validate()?;
    let out = &cfg.out;
    let _lock = RunLock::acquire(out)?;
    let resolved = cfg.to_toml()?;
    write_file(&out.join("config.toml"), resolved.as_bytes())?;
    let (split, inputs) = load_split(cfg, data_root)?;
    log::info!(
        "{} train / {} val / {} test windows",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let outcome = run_training(&split.train, &split.val, cfg.model.clone(), cfg.train.clone())?;
    outcome.best.save(&out.join("checkpoint.json"))?;
    outcome.last.save(&out.join("last.json"))?;
    write_file(&out.join("steps.csv"), &csv_bytes(|b| outcome.log.write_steps_csv(b)))?;
    write_file(&out.join("epochs.csv"), &csv_bytes(|b| outcome.log.write_epochs_csv(b)))?;
    let mut m = Manifest::new("train");
    m.config_sha256 = Some(hex_digest(resolved.as_bytes()));
    m.seed = Some(cfg.train.seed);
    m.inputs = inputs;
    m.outputs = ["config.toml", "checkpoint.json", "last.json", "steps.csv", "epochs.csv"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    m.write(&out.join("manifest.json"))?;
    Ok(TrainSummary {
        steps: outcome.log.steps.len(),
        epochs: outcome.log.epochs.len(),
        best_val_ade: outcome
            .log
            .epochs
            .iter()
            .filter_map(|e| e.val_ade)
            .min_by(|a, b| a.total_cmp(b)),
    })
}

/// Min-of-1 and min-of-k reports plus the constant-velocity baseline on one
/// split, written as CSV, JSON and a text table under `out`.
pub fn cmd_eval(
    checkpoint: &Path,
    cfg: &ExperimentConfig,
    data_root: Option<&Path>,
    split: Split,
    k: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<EvalReport>> {
    if k == 0 {
        return Err(CliError::Config("k must be at least 1".into()));
    }
    let ckpt = Checkpoint::load(checkpoint)?;
    let (ds, mut inputs) = load_split(cfg, data_root)?;
    let windows = match split {
        Split::Train => ds.train,
        Split::Val => ds.val,
        Split::Test => ds.test,
    };
    if windows.is_empty() {
        return Err(CliError::Data(format!("{split:?} split is empty")));
    }
    let (t_obs, t_pred) = (windows[0].t_obs(), windows[0].t_pred());
    if (t_obs, t_pred) != (ckpt.config.t_obs, ckpt.config.t_pred) {
        return Err(CliError::Data(format!(
            "checkpoint (format version {CHECKPOINT_VERSION}) expects {}+{} frames, data windows have {t_obs}+{t_pred}",
            ckpt.config.t_obs, ckpt.config.t_pred
        )));
    }
    let (generator, _) = ckpt.restore()?;
    let bs = cfg.train.batch_size;
    let mut reports = Vec::new();
    for kk in if k == 1 { vec![1] } else { vec![1, k] } {
        let mut r = eval_min_of_k(&generator, &windows, kk, seed, bs)?;
        r.model = format!("model min-of-{kk}");
        reports.push(r);
    }
    reports.push(constant_velocity_report(&windows)?);

    write_file(&out.join("report.csv"), &csv_bytes(|b| write_report_csv(b, &reports)))?;
    let json = serde_json::to_string_pretty(&reports).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&out.join("report.json"), json.as_bytes())?;
    write_file(&out.join("report.txt"), crate::eval::render_table(&reports).as_bytes())?;
    let mut m = Manifest::new(&format!("eval --split {split:?} --k {k}").to_lowercase());
    m.config_sha256 = Some(hex_digest(cfg.to_toml()?.as_bytes()));
    m.seed = Some(seed);
    inputs.insert(0, digest_file(checkpoint)?);
    m.inputs = inputs;
    m.outputs = vec!["report.csv".into(), "report.json".into(), "report.txt".into()];
    m.write(&out.join("manifest.json"))?;
    Ok(reports)
}

/// PCA projection and distance table of the class embeddings, with SVGs.
pub fn cmd_analyze(checkpoint: &Path, out: &Path) -> Result<EmbeddingAnalysis> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let (generator, _) = ckpt.restore()?;
    let rows = generator.class_embedding_matrix()?;
    let a = analyze_embeddings(&rows)?;
    if a.pca.zero_variance {
        log::warn!("class embeddings are identical; projection is all zeros");
    }

    let mut pca = String::from("class,pc1,pc2\n");
    for (c, p) in ClassLabel::ALL.iter().zip(&a.pca.coords) {
        let _ = writeln!(pca, "{},{},{}", c.name(), p[0], p[1]);
    }
    let mut dist = String::from("class");
    for c in ClassLabel::ALL {
        let _ = write!(dist, ",{}", c.name());
    }
    dist.push('\n');
    for (c, row) in ClassLabel::ALL.iter().zip(&a.distances) {
        dist.push_str(c.name());
        for d in row {
            let _ = write!(dist, ",{d}");
        }
        dist.push('\n');
    }
    let points: Vec<(String, [f64; 2])> =
        ClassLabel::ALL.iter().zip(&a.pca.coords).map(|(c, p)| (c.name().to_string(), *p)).collect();
    let ped = ClassLabel::Pedestrian.index();
    let bars: Vec<(String, f64)> = ClassLabel::ALL
        .iter()
        .filter(|c| c.index() != ped)
        .map(|c| (c.name().to_string(), a.distances[ped][c.index()]))
        .collect();

    write_file(&out.join("pca.csv"), pca.as_bytes())?;
    write_file(&out.join("distances.csv"), dist.as_bytes())?;
    write_file(&out.join("pca.svg"), svg::scatter("Class embeddings, first two principal components", &points).as_bytes())?;
    write_file(
        &out.join("pedestrian_distances.svg"),
        svg::bar_chart("Embedding distance from pedestrian", &bars).as_bytes(),
    )?;
    let mut m = Manifest::new("analyze");
    m.config_sha256 = Some(hex_digest(
        serde_json::to_string(&ckpt.config).map_err(|e| io_err(checkpoint, e))?.as_bytes(),
    ));
    m.inputs = vec![digest_file(checkpoint)?];
    m.outputs = ["pca.csv", "distances.csv", "pca.svg", "pedestrian_distances.svg"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    m.write(&out.join("manifest.json"))?;
    Ok(a)
}
