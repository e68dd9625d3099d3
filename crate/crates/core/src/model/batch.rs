use std::ops::Range;

use super::{ModelError, Result};
use crate::data::{ClassLabel, SceneWindow};

/// Agents of several windows stacked row-wise. Per-agent sequences are
/// stored agent-major: row `n * t + step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub t_obs: usize,
    pub t_pred: usize,
    pub observed: Vec<[f64; 2]>,
    pub future: Vec<[f64; 2]>,
    pub classes: Vec<ClassLabel>,
    /// Agent rows belonging to each window.
    pub segments: Vec<Range<usize>>,
}

impl Batch {
    pub fn new(windows: &[SceneWindow]) -> Result<Batch> {
        let first = windows
            .iter()
            .find(|w| !w.agents.is_empty())
            .ok_or_else(|| ModelError::Data("batch has no agents".into()))?;
        let (t_obs, t_pred) = (first.t_obs(), first.t_pred());
        let mut b = Batch {
            t_obs,
            t_pred,
            observed: Vec::new(),
            future: Vec::new(),
            classes: Vec::new(),
            segments: Vec::with_capacity(windows.len()),
        };
        for w in windows {
            if w.agents.is_empty() {
                return Err(ModelError::Data(format!(
                    "window {}@{} has no agents",
                    w.scene_id, w.start_frame
                )));
            }
            let start = b.classes.len();
            for a in &w.agents {
                if a.observed.len() != t_obs || a.future.len() != t_pred {
                    return Err(ModelError::Data(format!(
                        "agent {} has {}+{} points, expected {t_obs}+{t_pred}",
                        a.agent_id,
                        a.observed.len(),
                        a.future.len()
                    )));
                }
                b.observed.extend_from_slice(&a.observed);
                b.future.extend_from_slice(&a.future);
                b.classes.push(a.class);
            }
            b.segments.push(start..b.classes.len());
        }
        Ok(b)
    }

    pub fn n_agents(&self) -> usize {
        self.classes.len()
    }

    pub fn seq_len(&self) -> usize {
        self.t_obs + self.t_pred
    }

    pub fn observed_of(&self, agent: usize) -> &[[f64; 2]] {
        &self.observed[agent * self.t_obs..(agent + 1) * self.t_obs]
    }

    pub fn future_of(&self, agent: usize) -> &[[f64; 2]] {
        &self.future[agent * self.t_pred..(agent + 1) * self.t_pred]
    }

    pub fn last_observed(&self, agent: usize) -> [f64; 2] {
        self.observed[(agent + 1) * self.t_obs - 1]
    }

    /// Flat `[n × 2]` last observed positions.
    pub fn last_positions(&self) -> Vec<f64> {
        (0..self.n_agents())
            .flat_map(|a| self.last_observed(a))
            .collect()
    }

    /// Flat `[n × 2]` last observed displacement, divided by `scale`.
    pub fn last_displacements(&self, scale: f64) -> Vec<f64> {
        (0..self.n_agents())
            .flat_map(|a| {
                let o = self.observed_of(a);
                let (p, q) = (o[o.len() - 2], o[o.len() - 1]);
                [(q[0] - p[0]) / scale, (q[1] - p[1]) / scale]
            })
            .collect()
    }

    /// Flat `[n·t_obs × 2]` observed displacements (first step zero), divided by `scale`.
    pub fn observed_displacements(&self, scale: f64) -> Vec<f64> {
        (0..self.n_agents())
            .flat_map(|a| displacements(self.observed_of(a), None, scale))
            .collect()
    }

    /// Flat `[n·(t_obs+t_pred) × 2]` displacements of observed + true future.
    pub fn full_displacements(&self, scale: f64) -> Vec<f64> {
        (0..self.n_agents())
            .flat_map(|a| {
                let path: Vec<[f64; 2]> = self
                    .observed_of(a)
                    .iter()
                    .chain(self.future_of(a))
                    .copied()
                    .collect();
                displacements(&path, None, scale)
            })
            .collect()
    }

    /// Flat `[n·t × 6]` one-hot rows, each agent's class repeated `t` times.
    pub fn one_hot_rows(&self, t: usize) -> Vec<f64> {
        self.classes
            .iter()
            .flat_map(|c| std::iter::repeat_n(c.one_hot(), t).flatten())
            .collect()
    }

    /// Flat `[n × 2·t_pred]` true future, interleaved x, y.
    pub fn future_flat(&self) -> Vec<f64> {
        self.future.iter().flatten().copied().collect()
    }

    /// Ordered pairs `(i, j)`, `j != i`, of agents sharing a window, grouped by `i`.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for seg in &self.segments {
            for i in seg.clone() {
                for j in seg.clone() {
                    if i != j {
                        pairs.push((i, j));
                    }
                }
            }
        }
        pairs
    }
}

fn displacements(path: &[[f64; 2]], prev: Option<[f64; 2]>, scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.len() * 2);
    let mut last = prev.unwrap_or(path[0]);
    for p in path {
        out.push((p[0] - last[0]) / scale);
        out.push((p[1] - last[1]) / scale);
        last = *p;
    }
    out
}
