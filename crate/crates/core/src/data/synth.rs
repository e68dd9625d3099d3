use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::windows::{SceneWindow, WindowAgent};
use super::{ClassLabel, DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Constant velocity.
    Linear,
    /// Constant speed with a constant heading rate of random sign.
    Turn,
    /// Bicyclists circle a roundabout; other classes cross it straight.
    Roundabout,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Linear => "linear",
            SynthKind::Turn => "turn",
            SynthKind::Roundabout => "roundabout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n_agents: usize,
    pub classes: Vec<ClassLabel>,
    pub seed: u64,
    /// Standard deviation of per-point Gaussian position noise, in pixels.
    pub jitter: f64,
    pub windows: usize,
    pub t_obs: usize,
    pub t_pred: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            kind: SynthKind::Linear,
            n_agents: 3,
            classes: ClassLabel::ALL.to_vec(),
            seed: 0,
            jitter: 0.0,
            windows: 64,
            t_obs: 8,
            t_pred: 12,
        }
    }
}

const BASE_SPEED: f64 = 4.0;
/// Heading change per step for [`SynthKind::Turn`], radians.
pub const TURN_RATE: f64 = 0.1;
pub const ROUNDABOUT_CENTER: [f64; 2] = [200.0, 200.0];
pub const ROUNDABOUT_RADIUS: f64 = 60.0;
const ARENA: f64 = 400.0;

/// Pixels per subsampled step for each class.
pub fn class_speed(class: ClassLabel) -> f64 {
    BASE_SPEED
        * match class {
            ClassLabel::Pedestrian => 1.0,
            ClassLabel::Skateboarder => 1.6,
            ClassLabel::Bicyclist => 2.4,
            ClassLabel::Bus => 2.8,
            ClassLabel::Car => 3.2,
            ClassLabel::GolfCart => 3.6,
        }
}

/// Deterministic synthetic windows for desk-scale experiments.
pub fn synth_scene(spec: &SynthSpec) -> Result<Vec<SceneWindow>> {
    if spec.n_agents < 1 {
        return Err(DataError::Config("synthetic scene needs n_agents >= 1".into()));
    }
    if spec.classes.is_empty() {
        return Err(DataError::Config("synthetic scene needs at least one class".into()));
    }
    if spec.t_obs < 1 || spec.t_pred < 1 {
        return Err(DataError::Config("t_obs and t_pred must be >= 1".into()));
    }
    if !(spec.jitter >= 0.0 && spec.jitter.is_finite()) {
        return Err(DataError::Config(format!("invalid jitter {}", spec.jitter)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.jitter.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let len = spec.t_obs + spec.t_pred;
    let scene_id = format!("synth-{}-{}", spec.kind.name(), spec.seed);
    let mut out = Vec::with_capacity(spec.windows);
    for w in 0..spec.windows {
        let agents = (0..spec.n_agents)
            .map(|a| {
                let class = spec.classes[rng.random_range(0..spec.classes.len())];
                let mut path = agent_path(spec.kind, class, len, &mut rng);
                if spec.jitter > 0.0 {
                    for p in &mut path {
                        p[0] += noise.sample(&mut rng);
                        p[1] += noise.sample(&mut rng);
                    }
                }
                WindowAgent {
                    agent_id: a as u32,
                    class,
                    observed: path[..spec.t_obs].to_vec(),
                    future: path[spec.t_obs..].to_vec(),
                }
            })
            .collect();
        out.push(SceneWindow {
            scene_id: scene_id.clone(),
            start_frame: w as i64,
            agents,
        });
    }
    Ok(out)
}

fn agent_path(kind: SynthKind, class: ClassLabel, len: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let speed = class_speed(class);
    let start = [rng.random_range(0.0..ARENA), rng.random_range(0.0..ARENA)];
    let heading = rng.random_range(0.0..2.0 * PI);
    match kind {
        SynthKind::Linear => straight(start, heading, speed, len),
        SynthKind::Turn => {
            let rate = if rng.random_bool(0.5) { TURN_RATE } else { -TURN_RATE };
            let mut p = start;
            (0..len)
                .map(|t| {
                    let here = p;
                    let h = heading + rate * t as f64;
                    p = [p[0] + speed * h.cos(), p[1] + speed * h.sin()];
                    here
                })
                .collect()
        }
        SynthKind::Roundabout if class == ClassLabel::Bicyclist => {
            let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let omega = dir * speed / ROUNDABOUT_RADIUS;
            let phase = heading;
            (0..len)
                .map(|t| {
                    let a = phase + omega * t as f64;
                    [
                        ROUNDABOUT_CENTER[0] + ROUNDABOUT_RADIUS * a.cos(),
                        ROUNDABOUT_CENTER[1] + ROUNDABOUT_RADIUS * a.sin(),
                    ]
                })
                .collect()
        }
        SynthKind::Roundabout => {
            // enter from the rim heading through the center
            let p0 = [
                ROUNDABOUT_CENTER[0] - 2.0 * ROUNDABOUT_RADIUS * heading.cos(),
                ROUNDABOUT_CENTER[1] - 2.0 * ROUNDABOUT_RADIUS * heading.sin(),
            ];
            straight(p0, heading, speed, len)
        }
    }
}

fn straight(p0: [f64; 2], heading: f64, speed: f64, len: usize) -> Vec<[f64; 2]> {
    let v = [speed * heading.cos(), speed * heading.sin()];
    (0..len)
        .map(|t| [p0[0] + v[0] * t as f64, p0[1] + v[1] * t as f64])
        .collect()
}
