use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitMode {
    /// Per class: shuffle, then cut at `round(fraction·count)`.
    #[default]
    Stratified,
    /// Whole subjects go to one side.
    BySubject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub train: Vec<Window>,
    pub test: Vec<Window>,
    pub warnings: Vec<String>,
}

/// Deterministic train/test partition. Both sides keep the input order.
pub fn split(windows: Vec<Window>, train_fraction: f64, seed: u64, mode: SplitMode) -> Result<SplitOutcome> {
    if windows.is_empty() {
        return Err(Error::EmptyData("cannot split an empty dataset".into()));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::config(format!(
            "train fraction must lie in [0, 1], got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut in_train = alloc::vec![false; windows.len()];

    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    match mode {
        SplitMode::Stratified => {
            for (i, w) in windows.iter().enumerate() {
                groups.entry(w.label as u64).or_default().push(i);
            }
            for (label, mut idx) in groups {
                if idx.len() < 2 {
                    warnings.push(format!(
                        "class {label} has {} window(s); assigning it entirely to train",
                        idx.len()
                    ));
                    idx.iter().for_each(|&i| in_train[i] = true);
                    continue;
                }
                idx.shuffle(&mut rng);
                let cut = libm::round(train_fraction * idx.len() as f64) as usize;
                idx[..cut].iter().for_each(|&i| in_train[i] = true);
            }
        }
        SplitMode::BySubject => {
            for (i, w) in windows.iter().enumerate() {
                groups.entry(w.subject as u64).or_default().push(i);
            }
            let mut subjects: Vec<u64> = groups.keys().copied().collect();
            if subjects.len() < 2 {
                warnings.push(format!(
                    "only {} subject(s); assigning everything to train",
                    subjects.len()
                ));
                in_train.iter_mut().for_each(|t| *t = true);
            } else {
                subjects.shuffle(&mut rng);
                let cut = libm::round(train_fraction * subjects.len() as f64) as usize;
                for s in &subjects[..cut] {
                    groups[s].iter().for_each(|&i| in_train[i] = true);
                }
            }
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (w, t) in windows.into_iter().zip(in_train) {
        if t {
            train.push(w);
        } else {
            test.push(w);
        }
    }
    Ok(SplitOutcome { train, test, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn windows(labels: &[usize]) -> Vec<Window> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &label)| Window {
                frames: 1,
                dims: 1,
                features: vec![i as f64],
                label,
                subject: (i % 4) as u32,
            })
            .collect()
    }

    fn ids(ws: &[Window]) -> Vec<usize> {
        ws.iter().map(|w| w.features[0] as usize).collect()
    }

    #[test]
    fn ten_windows_split_seven_three() {
        let out = split(windows(&[0; 10]), 0.7, 1, SplitMode::Stratified).unwrap();
        assert_eq!((out.train.len(), out.test.len()), (7, 3));
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn deterministic_disjoint_exhaustive() {
        let labels: Vec<usize> = (0..57).map(|i| i % 3).collect();
        let a = split(windows(&labels), 0.7, 42, SplitMode::Stratified).unwrap();
        let b = split(windows(&labels), 0.7, 42, SplitMode::Stratified).unwrap();
        assert_eq!(a, b);
        let mut all = ids(&a.train);
        all.extend(ids(&a.test));
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
        for c in 0..3 {
            assert_eq!(a.train.iter().filter(|w| w.label == c).count(), 13);
        }
        let c = split(windows(&labels), 0.7, 43, SplitMode::Stratified).unwrap();
        assert_ne!(ids(&a.train), ids(&c.train));
    }

    #[test]
    fn singleton_class_goes_to_train_with_warning() {
        let out = split(windows(&[0, 0, 0, 1]), 0.7, 5, SplitMode::Stratified).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.train.iter().any(|w| w.label == 1));
        assert!(out.test.iter().all(|w| w.label == 0));
    }

    #[test]
    fn subject_split_keeps_subjects_whole() {
        let out = split(windows(&[0; 40]), 0.5, 9, SplitMode::BySubject).unwrap();
        for w in &out.test {
            assert!(out.train.iter().all(|t| t.subject != w.subject));
        }
        assert_eq!(out.train.len(), 20);
    }

    #[test]
    fn empty_input_errors() {
        assert!(split(vec![], 0.7, 0, SplitMode::Stratified).is_err());
    }
}
