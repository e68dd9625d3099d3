use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tracks::SceneTracks;
use super::{ClassLabel, DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub t_obs: usize,
    pub t_pred: usize,
    /// Raw frames between consecutive subsampled points.
    pub frame_step: i64,
    /// Window start spacing in subsampled frames.
    pub window_stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            t_obs: 8,
            t_pred: 12,
            frame_step: 12,
            window_stride: 1,
        }
    }
}

impl WindowConfig {
    pub fn seq_len(&self) -> usize {
        self.t_obs + self.t_pred
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAgent {
    pub agent_id: u32,
    pub class: ClassLabel,
    pub observed: Vec<[f64; 2]>,
    pub future: Vec<[f64; 2]>,
}

impl WindowAgent {
    pub fn one_hot(&self) -> [f64; 6] {
        self.class.one_hot()
    }

    pub fn full_path(&self) -> impl Iterator<Item = &[f64; 2]> {
        self.observed.iter().chain(&self.future)
    }
}

/// Agents co-present over `t_obs + t_pred` consecutive subsampled frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneWindow {
    pub scene_id: String,
    pub start_frame: i64,
    pub agents: Vec<WindowAgent>,
}

impl SceneWindow {
    pub fn t_obs(&self) -> usize {
        self.agents.first().map_or(0, |a| a.observed.len())
    }

    pub fn t_pred(&self) -> usize {
        self.agents.first().map_or(0, |a| a.future.len())
    }
}

/// Sliding windows over one scene's subsampled timeline. A window holds
/// every agent present at all of its frames; empty windows are skipped.
pub fn build_windows(scene: &SceneTracks, cfg: &WindowConfig) -> Result<Vec<SceneWindow>> {
    if cfg.t_obs < 1 || cfg.t_pred < 1 || cfg.frame_step < 1 || cfg.window_stride < 1 {
        return Err(DataError::Config(format!("invalid window config {cfg:?}")));
    }
    let len = cfg.seq_len();
    let step = cfg.frame_step;
    // start frame -> (track index, offset of the start point within the track)
    let mut starts: BTreeMap<i64, Vec<(usize, usize)>> = BTreeMap::new();
    for (ti, track) in scene.tracks.iter().enumerate() {
        let pts = &track.points;
        let mut run_start = 0;
        for i in 0..pts.len() {
            if i > 0 && pts[i].frame - pts[i - 1].frame != step {
                run_start = i;
            }
            // window ending at point i
            if i + 1 >= run_start + len {
                let s = i + 1 - len;
                let f = pts[s].frame;
                if (f.div_euclid(step)).rem_euclid(cfg.window_stride as i64) == 0 {
                    starts.entry(f).or_default().push((ti, s));
                }
            }
        }
    }
    Ok(starts
        .into_iter()
        .map(|(start_frame, members)| SceneWindow {
            scene_id: scene.scene_id.clone(),
            start_frame,
            agents: members
                .into_iter()
                .map(|(ti, s)| {
                    let t = &scene.tracks[ti];
                    let pts: Vec<[f64; 2]> =
                        t.points[s..s + len].iter().map(|p| [p.x, p.y]).collect();
                    WindowAgent {
                        agent_id: t.track_id,
                        class: t.class,
                        observed: pts[..cfg.t_obs].to_vec(),
                        future: pts[cfg.t_obs..].to_vec(),
                    }
                })
                .collect(),
        })
        .collect())
}

/// A path as its first point plus consecutive displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeTrack {
    pub origin: [f64; 2],
    pub deltas: Vec<[f64; 2]>,
}

/// Displacement form of each agent's full (observed + future) path.
pub fn to_relative(window: &SceneWindow) -> Vec<RelativeTrack> {
    window
        .agents
        .iter()
        .map(|a| {
            let pts: Vec<[f64; 2]> = a.full_path().copied().collect();
            RelativeTrack {
                origin: pts[0],
                deltas: pts
                    .windows(2)
                    .map(|w| [w[1][0] - w[0][0], w[1][1] - w[0][1]])
                    .collect(),
            }
        })
        .collect()
}

/// Inverse of [`to_relative`] for one agent: cumulative sum from the origin.
pub fn from_relative(rel: &RelativeTrack) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(rel.deltas.len() + 1);
    let mut p = rel.origin;
    out.push(p);
    for d in &rel.deltas {
        p = [p[0] + d[0], p[1] + d[1]];
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SceneWindow>,
    pub val: Vec<SceneWindow>,
    pub test: Vec<SceneWindow>,
}

/// Seeded shuffle, then an 8:1:1 partition by window count.
pub fn split_dataset(mut windows: Vec<SceneWindow>, seed: u64) -> Result<DatasetSplit> {
    let n = windows.len();
    if n < 3 {
        return Err(DataError::Split(format!(
            "need at least 3 windows to split, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    windows.shuffle(&mut rng);
    let n_train = (0.8 * n as f64).round() as usize;
    let n_val = (0.1 * n as f64).round() as usize;
    let test = windows.split_off(n_train + n_val);
    let val = windows.split_off(n_train);
    Ok(DatasetSplit {
        train: windows,
        val,
        test,
    })
}

const CSV_HEADER: &str = "scene_id,window_id,agent_id,class_index,t,x,y,is_future";

pub fn write_windows_csv(out: &mut impl Write, windows: &[SceneWindow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (wi, w) in windows.iter().enumerate() {
        for a in &w.agents {
            for (t, p) in a.full_path().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    w.scene_id,
                    wi,
                    a.agent_id,
                    a.class.index(),
                    t,
                    p[0],
                    p[1],
                    (t >= a.observed.len()) as u8
                )?;
            }
        }
    }
    Ok(())
}

/// Reads windows written by [`write_windows_csv`]. The start frame is not
/// part of the CSV layout and is restored as 0.
pub fn read_windows_csv(reader: impl BufRead) -> Result<Vec<SceneWindow>> {
    let mut windows: Vec<SceneWindow> = Vec::new();
    let mut key: Option<(String, usize)> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let err = |msg: String| DataError::Parse { line: lineno, msg };
        let line = line.map_err(|e| err(e.to_string()))?;
        if lineno == 1 {
            if line.trim() != CSV_HEADER {
                return Err(err(format!("expected header {CSV_HEADER:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(err(format!("expected 8 columns, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad integer {s:?}")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
        let (window_id, agent_id, class_index, t) = (int(f[1])?, int(f[2])?, int(f[3])?, int(f[4])?);
        let (x, y, is_future) = (num(f[5])?, num(f[6])?, int(f[7])? == 1);
        let class = ClassLabel::from_index(class_index)
            .ok_or_else(|| err(format!("class index {class_index} out of range")))?;
        let k = (f[0].to_string(), window_id);
        if key.as_ref() != Some(&k) {
            windows.push(SceneWindow {
                scene_id: k.0.clone(),
                start_frame: 0,
                agents: Vec::new(),
            });
            key = Some(k);
        }
        let w = windows.last_mut().unwrap();
        let agent_id = agent_id as u32;
        if t == 0 {
            w.agents.push(WindowAgent {
                agent_id,
                class,
                observed: Vec::new(),
                future: Vec::new(),
            });
        }
        let a = w
            .agents
            .last_mut()
            .filter(|a| a.agent_id == agent_id)
            .ok_or_else(|| err("agent rows must start at t = 0".into()))?;
        if t != a.observed.len() + a.future.len() {
            return Err(err(format!("non-consecutive t = {t}")));
        }
        if is_future {
            a.future.push([x, y]);
        } else if a.future.is_empty() {
            a.observed.push([x, y]);
        } else {
            return Err(err("observed point after future points".into()));
        }
    }
    Ok(windows)
}
