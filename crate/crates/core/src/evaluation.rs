//! Confusion matrices and micro-aggregated accuracy / F1.
//!
//! Per-class one-vs-rest counts are read off the matrix: `TP` is the
//! diagonal entry, `FP` the rest of the column, `FN` the rest of the row and
//! `TN` everything else. The TN-inclusive accuracy sums these over classes
//! and is reported next to the plain `trace / total` accuracy, since for more
//! than two classes the former is always at least the latter.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    /// Row = true class, column = predicted class.
    counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OneVsRest {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    /// `(ΣTP + ΣTN) / (ΣTP + ΣTN + ΣFP + ΣFN)` over one-vs-rest counts.
    pub one_vs_rest: f64,
    /// `trace / total`.
    pub plain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    /// `None` when the class was never predicted.
    pub precision: Option<f64>,
    /// `None` when the class never occurs.
    pub recall: Option<f64>,
    pub support: u64,
}

impl ConfusionMatrix {
    pub fn zeros(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn from_counts(num_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_classes * num_classes {
            return Err(Error::shape(
                "confusion counts",
                &[num_classes, num_classes],
                &[counts.len()],
            ));
        }
        Ok(Self { num_classes, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.num_classes + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.num_classes..(truth + 1) * self.num_classes]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|c| self.get(c, c)).sum()
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        let k = self.num_classes;
        if truth >= k || pred >= k {
            return Err(Error::validation(format!(
                "label out of range: truth {truth}, prediction {pred}, {k} classes"
            )));
        }
        self.counts[truth * k + pred] += 1;
        Ok(())
    }

    /// Entrywise sum of partial matrices.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::shape(
                "confusion matrix",
                &[self.num_classes, self.num_classes],
                &[other.num_classes, other.num_classes],
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn one_vs_rest(&self, class: usize) -> OneVsRest {
        let k = self.num_classes;
        let tp = self.get(class, class);
        let row: u64 = self.row(class).iter().sum();
        let col: u64 = (0..k).map(|t| self.get(t, class)).sum();
        let fp = col - tp;
        let fn_ = row - tp;
        OneVsRest {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }

    pub fn class_metrics(&self, class: usize) -> ClassMetrics {
        let c = self.one_vs_rest(class);
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        ClassMetrics {
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            support: c.tp + c.fn_,
        }
    }

    fn summed(&self) -> OneVsRest {
        (0..self.num_classes)
            .map(|c| self.one_vs_rest(c))
            .fold(OneVsRest::default(), |acc, c| OneVsRest {
                tp: acc.tp + c.tp,
                fp: acc.fp + c.fp,
                fn_: acc.fn_ + c.fn_,
                tn: acc.tn + c.tn,
            })
    }
}

pub fn confusion(preds: &[usize], truths: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::validation(format!(
            "{} predictions but {} ground-truth labels",
            preds.len(),
            truths.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(num_classes);
    for (&p, &t) in preds.iter().zip(truths) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<Accuracy> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::validation("accuracy of an empty confusion matrix"));
    }
    let s = cm.summed();
    let num = (s.tp + s.tn) as f64;
    Ok(Accuracy {
        one_vs_rest: num / (s.tp + s.tn + s.fp + s.fn_) as f64,
        plain: cm.trace() as f64 / total as f64,
    })
}

/// `2ΣTP / (2ΣTP + ΣFP + ΣFN)`.
pub fn f1_micro(cm: &ConfusionMatrix) -> Result<f64> {
    let s = cm.summed();
    let den = 2 * s.tp + s.fp + s.fn_;
    if den == 0 {
        return Err(Error::validation("micro-F1 of an empty confusion matrix"));
    }
    Ok((2 * s.tp) as f64 / den as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let y = [0, 1, 2, 2, 1];
        let cm = confusion(&y, &y, 3).unwrap();
        assert_eq!(cm.counts(), &[1, 0, 0, 0, 2, 0, 0, 0, 2]);
        let acc = accuracy(&cm).unwrap();
        assert_eq!((acc.one_vs_rest, acc.plain), (1.0, 1.0));
        assert_eq!(f1_micro(&cm).unwrap(), 1.0);
    }

    #[test]
    fn empty_lists_give_zero_matrix_and_metric_errors() {
        let cm = confusion(&[], &[], 4).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(accuracy(&cm).is_err());
        assert!(f1_micro(&cm).is_err());
    }

    #[test]
    fn hand_tallied_six_pairs() {
        // (truth, pred): (0,0) (0,1) (1,1) (2,1) (2,2) (2,2)
        let truths = [0, 0, 1, 2, 2, 2];
        let preds = [0, 1, 1, 1, 2, 2];
        let cm = confusion(&preds, &truths, 3).unwrap();
        assert_eq!(cm.counts(), &[1, 1, 0, 0, 1, 0, 0, 1, 2]);
    }

    #[test]
    fn three_class_one_error_in_four() {
        // truth 0,1,2,2 predicted 0,1,2,1
        let cm = confusion(&[0, 1, 2, 1], &[0, 1, 2, 2], 3).unwrap();
        // per-class (tp, fp, fn, tn): c0 (1,0,0,3) c1 (1,1,0,2) c2 (1,0,1,2)
        // ΣTP=3 ΣFP=1 ΣFN=1 ΣTN=7 → (3+7)/12
        let acc = accuracy(&cm).unwrap();
        assert_eq!(acc.one_vs_rest, 10.0 / 12.0);
        assert_eq!(acc.plain, 0.75);
        assert_eq!(f1_micro(&cm).unwrap(), 6.0 / 8.0);
    }

    #[test]
    fn binary_one_vs_rest_equals_plain() {
        let cm = ConfusionMatrix::from_counts(2, vec![5, 2, 3, 7]).unwrap();
        let acc = accuracy(&cm).unwrap();
        assert_eq!(acc.one_vs_rest, acc.plain);
    }

    #[test]
    fn validation_errors() {
        assert!(confusion(&[0, 1], &[0], 2).is_err());
        assert!(confusion(&[0, 3], &[0, 1], 3).is_err());
        assert!(ConfusionMatrix::from_counts(2, vec![1, 2, 3]).is_err());
        let mut a = ConfusionMatrix::zeros(2);
        assert!(a.merge(&ConfusionMatrix::zeros(3)).is_err());
    }

    #[test]
    fn merge_sums_partials() {
        let a = confusion(&[0, 1], &[0, 0], 2).unwrap();
        let b = confusion(&[1, 1], &[1, 0], 2).unwrap();
        let mut m = a.clone();
        m.merge(&b).unwrap();
        assert_eq!(m, confusion(&[0, 1, 1, 1], &[0, 0, 1, 0], 2).unwrap());
    }

    #[test]
    fn per_class_precision_recall() {
        let cm = confusion(&[0, 1, 2, 1], &[0, 1, 2, 2], 4).unwrap();
        let c1 = cm.class_metrics(1);
        assert_eq!((c1.precision, c1.recall, c1.support), (Some(0.5), Some(1.0), 1));
        let c3 = cm.class_metrics(3);
        assert_eq!((c3.precision, c3.recall), (None, None));
    }
}
