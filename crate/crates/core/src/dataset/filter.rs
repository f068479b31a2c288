//! Acceleration-statistics filtering.
//!
//! Two statistics are computed per sensor on the acceleration magnitude
//! `|a_t|`:
//!
//! - **variance**: population variance over all frames;
//! - **peak rate**: detected peaks per second. A frame is a peak candidate
//!   when its magnitude exceeds `peak_threshold`, is strictly greater than
//!   the previous frame and at least the next one. Candidates closer than
//!   `min_peak_separation_secs` to the last accepted peak replace it only if
//!   they are higher.
//!
//! A sequence is dropped when any statistic of any sensor leaves its class
//! band. Sensors are checked in stream order, variance before peak rate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

use super::LabeledSequence;

pub const DEFAULT_MIN_PEAK_SEPARATION_SECS: f64 = 0.25;

/// Inclusive interval; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Band {
    #[cfg_attr(feature = "serde", serde(default = "neg_inf"))]
    pub min: f64,
    #[cfg_attr(feature = "serde", serde(default = "pos_inf"))]
    pub max: f64,
}

#[cfg(feature = "serde")]
fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

#[cfg(feature = "serde")]
fn pos_inf() -> f64 {
    f64::INFINITY
}

impl Band {
    pub const OPEN: Band = Band {
        min: f64::NEG_INFINITY,
        max: f64::INFINITY,
    };

    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

impl Default for Band {
    fn default() -> Self {
        Band::OPEN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassBands {
    pub label: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub variance: Band,
    #[cfg_attr(feature = "serde", serde(default))]
    pub peak_rate: Band,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterPolicy {
    /// Magnitude (m/s²) a peak must exceed.
    pub peak_threshold: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_separation"))]
    pub min_peak_separation_secs: f64,
    pub classes: Vec<ClassBands>,
}

#[cfg(feature = "serde")]
fn default_separation() -> f64 {
    DEFAULT_MIN_PEAK_SEPARATION_SECS
}

impl FilterPolicy {
    /// Accepts everything for labels `0..num_classes`.
    pub fn open(num_classes: usize) -> Self {
        Self {
            peak_threshold: 0.0,
            min_peak_separation_secs: DEFAULT_MIN_PEAK_SEPARATION_SECS,
            classes: (0..num_classes)
                .map(|label| ClassBands {
                    label,
                    ..ClassBands::default()
                })
                .collect(),
        }
    }

    pub fn bands(&self, label: usize) -> Option<&ClassBands> {
        self.classes.iter().find(|c| c.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Variance,
    PeakRate,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Variance => "variance",
            Statistic::PeakRate => "peak_rate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub sensor: String,
    pub statistic: Statistic,
    pub value: f64,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterDecision {
    pub keep: bool,
    /// First band violation, when dropped.
    pub violation: Option<Violation>,
}

/// One line of the filter report.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterReportRow {
    pub index: usize,
    pub source_tag: String,
    pub label: usize,
    pub decision: FilterDecision,
}

fn magnitudes(seq: &LabeledSequence, sensor: usize) -> Vec<f64> {
    seq.imu.sensors[sensor]
        .accelerations
        .iter()
        .map(|a| a.norm())
        .collect()
}

/// Population variance; zero for fewer than one sample.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Frame indices of detected peaks (see module docs).
pub fn detect_peaks(xs: &[f64], threshold: f64, min_separation_frames: f64) -> Vec<usize> {
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..xs.len().saturating_sub(1) {
        let x = xs[i];
        if !(x > threshold && x > xs[i - 1] && x >= xs[i + 1]) {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if ((i - *last) as f64) < min_separation_frames => {
                if x > xs[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    peaks
}

/// Peaks per second of a magnitude signal sampled at `frame_rate`.
pub fn peak_rate(xs: &[f64], frame_rate: f64, threshold: f64, min_separation_secs: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let peaks = detect_peaks(xs, threshold, min_separation_secs * frame_rate);
    peaks.len() as f64 * frame_rate / xs.len() as f64
}

pub fn filter_by_acceleration(seq: &LabeledSequence, policy: &FilterPolicy) -> Result<FilterDecision> {
    let bands = policy.bands(seq.label).ok_or_else(|| {
        Error::config(format!(
            "filter policy has no bands for class {} (sequence {:?})",
            seq.label, seq.source_tag
        ))
    })?;
    for (s, stream) in seq.imu.sensors.iter().enumerate() {
        let mags = magnitudes(seq, s);
        let var = variance(&mags);
        if !bands.variance.contains(var) {
            return Ok(FilterDecision {
                keep: false,
                violation: Some(Violation {
                    sensor: stream.name.clone(),
                    statistic: Statistic::Variance,
                    value: var,
                    band: bands.variance,
                }),
            });
        }
        let rate = peak_rate(
            &mags,
            seq.imu.frame_rate,
            policy.peak_threshold,
            policy.min_peak_separation_secs,
        );
        if !bands.peak_rate.contains(rate) {
            return Ok(FilterDecision {
                keep: false,
                violation: Some(Violation {
                    sensor: stream.name.clone(),
                    statistic: Statistic::PeakRate,
                    value: rate,
                    band: bands.peak_rate,
                }),
            });
        }
    }
    Ok(FilterDecision {
        keep: true,
        violation: None,
    })
}

/// Filters a batch, returning survivors and one report row per input.
pub fn filter_sequences(
    sequences: Vec<LabeledSequence>,
    policy: &FilterPolicy,
) -> Result<(Vec<LabeledSequence>, Vec<FilterReportRow>)> {
    let mut kept = Vec::with_capacity(sequences.len());
    let mut report = Vec::with_capacity(sequences.len());
    for (index, seq) in sequences.into_iter().enumerate() {
        let decision = filter_by_acceleration(&seq, policy)?;
        report.push(FilterReportRow {
            index,
            source_tag: seq.source_tag.clone(),
            label: seq.label,
            decision: decision.clone(),
        });
        if decision.keep {
            kept.push(seq);
        }
    }
    Ok((kept, report))
}
