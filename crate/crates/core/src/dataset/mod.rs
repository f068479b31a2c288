//! From labeled IMU sequences to a windowed, normalized, split dataset.
//!
//! The stages run in this order: [`filter`] (acceleration statistics),
//! [`upsample`] (sequence-level interpolation for minority classes),
//! [`features`] (per-frame feature rows), [`window`] (sliding windows),
//! [`split`] (stratified or subject-wise) and [`normalize`] (fit on the
//! training split only).

pub mod features;
pub mod filter;
pub mod normalize;
pub mod split;
pub mod upsample;
pub mod window;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sensor_synth::ImuSequence;

pub use features::{assemble_features, FeatureMatrix};
pub use filter::{
    filter_by_acceleration, filter_sequences, Band, ClassBands, FilterDecision, FilterPolicy,
    FilterReportRow, Statistic, Violation,
};
pub use normalize::{normalize_apply, normalize_fit, NormStats};
pub use split::{split, SplitMode, SplitOutcome};
pub use upsample::{resample_imu, upsample_class};
pub use window::{segment_windows, window_count, window_starts, window_stride};

/// Defaults matching the three-sensor, 60 Hz setup.
pub const DEFAULT_WINDOW_LEN: usize = 60;
pub const DEFAULT_OVERLAP: f64 = 0.5;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;
/// Each sensor contributes 3 acceleration + 9 orientation values per frame.
pub const FEATURES_PER_SENSOR: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub imu: ImuSequence,
    pub label: usize,
    pub subject: u32,
    pub source_tag: String,
}

/// Ordered activity names; ids are positions.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelMap {
    entries: Vec<(usize, String)>,
}

impl LabelMap {
    pub fn new(entries: Vec<(usize, String)>) -> Result<Self> {
        for (pos, (id, name)) in entries.iter().enumerate() {
            if *id != pos {
                return Err(Error::config(format!(
                    "label map ids must be contiguous from 0; found id {id} at position {pos}"
                )));
            }
            if entries[..pos].iter().any(|(_, other)| other == name) {
                return Err(Error::config(format!("duplicate activity name {name:?}")));
            }
        }
        if entries.is_empty() {
            return Err(Error::config("label map is empty"));
        }
        Ok(Self { entries })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names
                .iter()
                .enumerate()
                .map(|(i, n)| (i, String::from(n.as_ref())))
                .collect(),
        )
    }

    /// The five activities of the real-IMU recordings.
    pub fn preset_real_5() -> Self {
        Self::from_names(&[
            "computer_works",
            "walking",
            "jumping",
            "stretching_arms",
            "stretching_legs",
        ])
        .expect("preset is valid")
    }

    /// A 12-class motion-capture map. The category names are illustrative.
    pub fn preset_mocap_12() -> Self {
        Self::from_names(&[
            "walking",
            "running",
            "jumping",
            "sitting",
            "standing",
            "stretching_arms",
            "stretching_legs",
            "computer_works",
            "dancing",
            "throwing",
            "kicking",
            "cleaning",
        ])
        .expect("preset is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(|(_, n)| n.as_str())
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.entries.iter().find(|(_, n)| n == name).map(|(i, _)| *i)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(_, n)| n.as_str())
    }
}

/// A fixed-length `frames × dims` feature block, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub frames: usize,
    pub dims: usize,
    pub features: Vec<f64>,
    pub label: usize,
    pub subject: u32,
}

impl Window {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.features[t * self.dims..(t + 1) * self.dims]
    }

    pub fn is_finite(&self) -> bool {
        self.features.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn label_map_rules() {
        let m = LabelMap::preset_real_5();
        assert_eq!(m.len(), 5);
        assert_eq!(m.id("walking"), Some(1));
        assert_eq!(m.name(4), Some("stretching_legs"));
        assert_eq!(LabelMap::preset_mocap_12().len(), 12);
        assert!(LabelMap::new(vec![(0, "a".into()), (2, "b".into())]).is_err());
        assert!(LabelMap::from_names(&["a", "a"]).is_err());
        assert!(LabelMap::from_names::<&str>(&[]).is_err());
    }
}
