use alloc::vec::Vec;

use super::{FeatureMatrix, Window};

/// `round(window_len·(1 − overlap))`, at least 1.
pub fn window_stride(window_len: usize, overlap: f64) -> usize {
    let stride = libm::round(window_len as f64 * (1.0 - overlap));
    if stride < 1.0 {
        1
    } else {
        stride as usize
    }
}

pub fn window_count(frames: usize, window_len: usize, overlap: f64) -> usize {
    if window_len == 0 || frames < window_len {
        return 0;
    }
    (frames - window_len) / window_stride(window_len, overlap) + 1
}

/// Start frames of every full window; trailing partial frames are dropped.
///
/// Expects `0 ≤ overlap < 1` and `window_len ≥ 1`; a zero length yields no
/// windows.
pub fn window_starts(frames: usize, window_len: usize, overlap: f64) -> Vec<usize> {
    if window_len == 0 {
        return Vec::new();
    }
    let stride = window_stride(window_len, overlap);
    (0..)
        .map(|i| i * stride)
        .take_while(|start| start + window_len <= frames)
        .collect()
}

pub fn segment_windows(
    seq: &FeatureMatrix,
    window_len: usize,
    overlap: f64,
    label: usize,
    subject: u32,
) -> Vec<Window> {
    window_starts(seq.frames, window_len, overlap)
        .into_iter()
        .map(|start| Window {
            frames: window_len,
            dims: seq.dims,
            features: seq.data[start * seq.dims..(start + window_len) * seq.dims].to_vec(),
            label,
            subject,
        })
        .collect()
}
