use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::annotations::{bbox_center, parse_annotations, ClassVocab, RawAnnotation};
use super::{ClassLabel, DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: i64,
    pub x: f64,
    pub y: f64,
}

/// Time-ordered bounding-box centers of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub track_id: u32,
    pub class: ClassLabel,
    pub points: Vec<TrackPoint>,
}

/// All tracks of one recorded scene video, on a common frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTracks {
    pub scene_id: String,
    pub tracks: Vec<AgentTrack>,
}

/// Groups annotations by track id. Points are sorted by frame; duplicate
/// frames keep the first record. A track's class is that of its first record.
pub fn tracks_from_annotations(anns: &[RawAnnotation]) -> Vec<AgentTrack> {
    let mut by_id: BTreeMap<u32, Vec<&RawAnnotation>> = BTreeMap::new();
    for a in anns {
        by_id.entry(a.track_id).or_default().push(a);
    }
    by_id
        .into_iter()
        .map(|(track_id, recs)| {
            let class = recs[0].label;
            let mut points: Vec<TrackPoint> = recs
                .iter()
                .map(|a| {
                    let (x, y) = bbox_center(&a.bbox);
                    TrackPoint {
                        frame: a.frame,
                        x,
                        y,
                    }
                })
                .collect();
            points.sort_by_key(|p| p.frame);
            points.dedup_by_key(|p| p.frame);
            AgentTrack {
                track_id,
                class,
                points,
            }
        })
        .collect()
}

/// Keeps the points whose frame lies on the global grid `frame % stride == 0`,
/// so every track of a scene shares one subsampled timeline.
pub fn subsample(track: &AgentTrack, stride: i64) -> Result<AgentTrack> {
    if stride < 1 {
        return Err(DataError::Config(format!("stride must be >= 1, got {stride}")));
    }
    Ok(AgentTrack {
        track_id: track.track_id,
        class: track.class,
        points: track
            .points
            .iter()
            .filter(|p| p.frame.rem_euclid(stride) == 0)
            .copied()
            .collect(),
    })
}

/// Loads `root/<scene>/<video>/annotations.txt`, one [`SceneTracks`] per
/// video, subsampled with `stride`. Scenes are returned in path order.
pub fn load_scene_dir(root: &Path, vocab: &ClassVocab, stride: i64) -> Result<Vec<SceneTracks>> {
    let io = |path: &Path, source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    let mut scenes: Vec<_> = std::fs::read_dir(root)
        .map_err(|e| io(root, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    scenes.sort();
    for scene in scenes {
        let mut videos: Vec<_> = std::fs::read_dir(&scene)
            .map_err(|e| io(&scene, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        videos.sort();
        for video in videos {
            let ann = video.join("annotations.txt");
            if ann.is_file() {
                files.push(ann);
            }
        }
    }
    if files.is_empty() {
        return Err(DataError::Config(format!(
            "no annotation files under {}; expected layout <scene>/<video>/annotations.txt",
            root.display()
        )));
    }
    let mut out = Vec::with_capacity(files.len());
    for path in files {
        let file = File::open(&path).map_err(|e| io(&path, e))?;
        let anns = parse_annotations(BufReader::new(file), vocab).map_err(|e| DataError::File {
            path: path.clone(),
            source: Box::new(e),
        })?;
        let video = path.parent().unwrap();
        let scene_id = format!(
            "{}/{}",
            video.parent().unwrap().file_name().unwrap().to_string_lossy(),
            video.file_name().unwrap().to_string_lossy()
        );
        let tracks = tracks_from_annotations(&anns)
            .iter()
            .map(|t| subsample(t, stride))
            .collect::<Result<Vec<_>>>()?;
        out.push(SceneTracks { scene_id, tracks });
    }
    Ok(out)
}
