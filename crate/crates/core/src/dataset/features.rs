use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sensor_synth::ImuSequence;

use super::FEATURES_PER_SENSOR;

/// Per-frame feature rows, `frames × dims`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: usize,
    pub dims: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dims..(t + 1) * self.dims]
    }
}

/// Concatenates, for each sensor in `sensor_order`, its 3 acceleration
/// values followed by its 9 row-major orientation entries.
pub fn assemble_features<S: AsRef<str>>(imu: &ImuSequence, sensor_order: &[S]) -> Result<FeatureMatrix> {
    let streams = sensor_order
        .iter()
        .map(|name| {
            imu.sensor(name.as_ref()).ok_or_else(|| {
                let available: Vec<String> = imu.sensor_names().into_iter().map(String::from).collect();
                Error::validation(format!(
                    "sensor {:?} not found; available: {available:?}",
                    name.as_ref()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let frames = imu.frame_count();
    let dims = FEATURES_PER_SENSOR * streams.len();
    let mut data = Vec::with_capacity(frames * dims);
    for t in 0..frames {
        for s in &streams {
            data.extend(s.accelerations[t].iter());
            let r = &s.orientations[t];
            for row in 0..3 {
                for col in 0..3 {
                    data.push(r[(row, col)]);
                }
            }
        }
    }
    Ok(FeatureMatrix { frames, dims, data })
}
