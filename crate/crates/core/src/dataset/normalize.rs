use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::Window;

pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension z-score parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: Vec<f64>,
}

/// Fit on training windows only.
pub fn normalize_fit(windows: &[Window]) -> Result<NormStats> {
    let first = windows
        .first()
        .ok_or_else(|| Error::EmptyData("cannot fit normalization on zero windows".into()))?;
    let dims = first.dims;
    if let Some(w) = windows.iter().find(|w| w.dims != dims) {
        return Err(Error::shape("window dims", &[dims], &[w.dims]));
    }
    let mut count = 0usize;
    let mut sum = vec![0.0; dims];
    for w in windows {
        for row in w.features.chunks_exact(dims) {
            for (s, x) in sum.iter_mut().zip(row) {
                *s += x;
            }
            count += 1;
        }
    }
    let n = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mut sq = vec![0.0; dims];
    for w in windows {
        for row in w.features.chunks_exact(dims) {
            for ((s, x), m) in sq.iter_mut().zip(row).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
    }
    let std = sq.iter().map(|s| libm::sqrt(s / n).max(STD_FLOOR)).collect();
    Ok(NormStats { mean, std })
}

pub fn normalize_apply(windows: &[Window], stats: &NormStats) -> Result<Vec<Window>> {
    windows
        .iter()
        .map(|w| {
            if w.dims != stats.mean.len() {
                return Err(Error::shape("window dims", &[stats.mean.len()], &[w.dims]));
            }
            let mut out = w.clone();
            for row in out.features.chunks_exact_mut(w.dims) {
                for ((x, m), s) in row.iter_mut().zip(&stats.mean).zip(&stats.std) {
                    *x = (*x - m) / s;
                }
            }
            Ok(out)
        })
        .collect()
}
