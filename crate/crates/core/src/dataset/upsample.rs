//! Minority-class augmentation by time-domain linear interpolation.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sensor_synth::{ImuSequence, SensorStream};
use crate::so3;

use super::LabeledSequence;

/// Resampling factors are drawn uniformly from this range.
pub const RESAMPLE_FACTOR_RANGE: (f64, f64) = (1.05, 1.25);

fn lerp_at<T, F>(samples: &[T], u: f64, mix: F) -> T
where
    T: Copy,
    F: Fn(&T, &T, f64) -> T,
{
    let last = samples.len() - 1;
    let i = libm::floor(u) as usize;
    if i >= last {
        return samples[last];
    }
    let frac = u - i as f64;
    if frac == 0.0 {
        samples[i]
    } else {
        mix(&samples[i], &samples[i + 1], frac)
    }
}

/// Stretches a sequence to `round((n − 1)·factor) + 1` frames by linear
/// interpolation; orientations are projected back onto SO(3).
pub fn resample_imu(imu: &ImuSequence, factor: f64) -> Result<ImuSequence> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::validation(format!("resampling factor must be positive, got {factor}")));
    }
    let n = imu.frame_count();
    if n == 0 {
        return Err(Error::validation("cannot resample an empty sequence"));
    }
    let m = libm::round((n - 1) as f64 * factor) as usize + 1;
    let scale = if m > 1 { (n - 1) as f64 / (m - 1) as f64 } else { 0.0 };
    let sensors = imu
        .sensors
        .iter()
        .map(|s| {
            let mut orientations = Vec::with_capacity(m);
            let mut accelerations = Vec::with_capacity(m);
            for i in 0..m {
                let u = i as f64 * scale;
                accelerations.push(lerp_at(&s.accelerations, u, |a: &Vector3<f64>, b, w| a + (b - a) * w));
                let r = lerp_at(&s.orientations, u, |a: &Matrix3<f64>, b, w| a + (b - a) * w);
                orientations.push(if so3::is_rotation(&r, 1e-12) {
                    r
                } else {
                    so3::project_to_rotation(&r)
                });
            }
            SensorStream {
                name: s.name.clone(),
                orientations,
                accelerations,
            }
        })
        .collect();
    Ok(ImuSequence {
        frame_rate: imu.frame_rate,
        sensors,
    })
}

/// Appends interpolated copies of `class_id` sequences until the class has
/// `target_count` members. Originals are untouched and keep their position;
/// sources are taken round-robin in input order, each with a fresh factor.
pub fn upsample_class(
    sequences: &[LabeledSequence],
    class_id: usize,
    target_count: usize,
    seed: u64,
) -> Result<Vec<LabeledSequence>> {
    let members: Vec<&LabeledSequence> = sequences.iter().filter(|s| s.label == class_id).collect();
    if members.is_empty() {
        return Err(Error::validation(format!("class {class_id} has no sequences to up-sample")));
    }
    let mut out = sequences.to_vec();
    if target_count <= members.len() {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = RESAMPLE_FACTOR_RANGE;
    for k in 0..target_count - members.len() {
        let src = members[k % members.len()];
        let factor = rng.random_range(lo..=hi);
        out.push(LabeledSequence {
            imu: resample_imu(&src.imu, factor)?,
            label: src.label,
            subject: src.subject,
            source_tag: format!("{}+interp(x{factor:.6})", src.source_tag),
        });
    }
    Ok(out)
}
