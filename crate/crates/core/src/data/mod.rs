//! Stanford-Drone-format parsing, scene windowing, dataset splits and
//! synthetic scenes.

mod annotations;
mod synth;
mod tracks;
mod windows;

pub use annotations::{
    bbox_center, parse_annotations, serialize_annotation, BBox, ClassVocab, RawAnnotation,
};
pub use synth::{class_speed, synth_scene, SynthKind, SynthSpec};
pub use tracks::{load_scene_dir, subsample, tracks_from_annotations, AgentTrack, SceneTracks, TrackPoint};
pub use windows::{
    build_windows, from_relative, read_windows_csv, split_dataset, to_relative, write_windows_csv,
    DatasetSplit, RelativeTrack, SceneWindow, WindowAgent, WindowConfig,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown class label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("split error: {0}")]
    Split(String),
    #[error("invalid data config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<DataError>,
    },
}

pub type Result<T> = std::result::Result<T, DataError>;

/// The six agent classes, ordered alphabetically by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Bicyclist,
    Bus,
    Car,
    GolfCart,
    Pedestrian,
    Skateboarder,
}

impl ClassLabel {
    pub const COUNT: usize = 6;
    pub const ALL: [ClassLabel; 6] = [
        ClassLabel::Bicyclist,
        ClassLabel::Bus,
        ClassLabel::Car,
        ClassLabel::GolfCart,
        ClassLabel::Pedestrian,
        ClassLabel::Skateboarder,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ClassLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Bicyclist => "bicyclist",
            ClassLabel::Bus => "bus",
            ClassLabel::Car => "car",
            ClassLabel::GolfCart => "golf cart",
            ClassLabel::Pedestrian => "pedestrian",
            ClassLabel::Skateboarder => "skateboarder",
        }
    }

    /// Label string used in the drone dataset's annotation files.
    pub fn dataset_label(self) -> &'static str {
        match self {
            ClassLabel::Bicyclist => "Biker",
            ClassLabel::Bus => "Bus",
            ClassLabel::Car => "Car",
            ClassLabel::GolfCart => "Cart",
            ClassLabel::Pedestrian => "Pedestrian",
            ClassLabel::Skateboarder => "Skater",
        }
    }

    pub fn one_hot(self) -> [f64; 6] {
        let mut v = [0.0; 6];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_is_alphabetical() {
        let names: Vec<_> = ClassLabel::ALL.iter().map(|c| c.name()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        for (i, c) in ClassLabel::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(ClassLabel::from_index(i), Some(*c));
        }
    }

    #[test]
    fn one_hot_has_single_one() {
        for c in ClassLabel::ALL {
            let v = c.one_hot();
            assert_eq!(v.iter().sum::<f64>(), 1.0);
            assert_eq!(v[c.index()], 1.0);
        }
    }
}
