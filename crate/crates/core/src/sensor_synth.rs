//! Virtual IMUs: orientation from forward kinematics, acceleration from the
//! central second difference of a skinned vertex trajectory.
//!
//! Accelerations are reported in the global frame with no gravity term
//! unless [`SynthOptions`] asks otherwise. The first and last input frames
//! have no central difference and are dropped, so `n` poses yield `n − 2`
//! IMU frames.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kinematics::{pose_vertices, BodyModel, Pose, RigidTransform, RotationCheck, Shape};
use crate::so3;

/// Orientation streams must stay on SO(3) within this.
pub const IMU_ORIENTATION_TOL: f64 = 1e-4;

/// Standard gravity, z up.
pub const STANDARD_GRAVITY: [f64; 3] = [0.0, 0.0, -9.81];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensorPlacement {
    pub name: String,
    /// Vertex whose trajectory is differentiated.
    pub vertex_index: usize,
    /// Joint whose global rotation gives the orientation.
    pub joint_index: usize,
    #[cfg_attr(feature = "serde", serde(default = "Matrix3::identity"))]
    pub local_rotation_offset: Matrix3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub frame_rate: f64,
    pub poses: Vec<Pose>,
}

/// One sensor's readings.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorStream {
    pub name: String,
    pub orientations: Vec<Matrix3<f64>>,
    pub accelerations: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImuSequence {
    pub frame_rate: f64,
    pub sensors: Vec<SensorStream>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AccelFrame {
    #[default]
    Global,
    /// `R_tᵀ·a_t`, with `R_t` the sensor orientation.
    Sensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SynthOptions {
    pub accel_frame: AccelFrame,
    /// When set, report specific force `a − g` instead of `a`.
    pub gravity: Option<Vector3<f64>>,
    pub rotation_check: RotationCheck,
}

impl SensorPlacement {
    pub fn validate(&self, model: &BodyModel) -> Result<()> {
        if self.vertex_index >= model.vertex_count() {
            return Err(Error::validation(format!(
                "sensor {:?}: vertex_index {} out of range (model has {} vertices)",
                self.name,
                self.vertex_index,
                model.vertex_count()
            )));
        }
        if self.joint_index >= model.joint_count() {
            return Err(Error::validation(format!(
                "sensor {:?}: joint_index {} out of range (model has {} joints)",
                self.name,
                self.joint_index,
                model.joint_count()
            )));
        }
        if !so3::is_rotation(&self.local_rotation_offset, so3::ORTHONORMAL_TOL) {
            return Err(Error::validation(format!(
                "sensor {:?}: local_rotation_offset is not a rotation",
                self.name
            )));
        }
        Ok(())
    }
}

impl ImuSequence {
    pub fn frame_count(&self) -> usize {
        self.sensors.first().map_or(0, |s| s.orientations.len())
    }

    pub fn sensor(&self, name: &str) -> Option<&SensorStream> {
        self.sensors.iter().find(|s| s.name == name)
    }

    pub fn sensor_names(&self) -> Vec<&str> {
        self.sensors.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn duration_secs(&self) -> f64 {
        self.frame_count() as f64 / self.frame_rate
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::validation(format!(
                "frame rate must be positive, got {}",
                self.frame_rate
            )));
        }
        let frames = self.frame_count();
        for s in &self.sensors {
            if s.orientations.len() != frames || s.accelerations.len() != frames {
                return Err(Error::validation(format!(
                    "sensor {:?} has {} orientations and {} accelerations; expected {frames}",
                    s.name,
                    s.orientations.len(),
                    s.accelerations.len()
                )));
            }
            if let Some(t) = s
                .orientations
                .iter()
                .position(|r| !so3::is_rotation(r, IMU_ORIENTATION_TOL))
            {
                return Err(Error::validation(format!(
                    "sensor {:?}: orientation at frame {t} is not a rotation",
                    s.name
                )));
            }
            if s.accelerations.iter().any(|a| a.iter().any(|x| !x.is_finite())) {
                return Err(Error::validation(format!(
                    "sensor {:?} has non-finite accelerations",
                    s.name
                )));
            }
        }
        Ok(())
    }
}

/// Sensor orientation: `R_joint · R_offset`.
pub fn virtual_orientation(global: &[RigidTransform], placement: &SensorPlacement) -> Result<Matrix3<f64>> {
    let joint = global.get(placement.joint_index).ok_or_else(|| {
        Error::validation(format!(
            "sensor {:?}: joint_index {} out of range ({} transforms)",
            placement.name,
            placement.joint_index,
            global.len()
        ))
    })?;
    Ok(joint.rotation * placement.local_rotation_offset)
}

/// `(p_{t−1} + p_{t+1} − 2·p_t) / dt²`.
pub fn virtual_acceleration(
    p_prev: &Vector3<f64>,
    p_curr: &Vector3<f64>,
    p_next: &Vector3<f64>,
    dt: f64,
) -> Result<Vector3<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation(format!("dt must be positive, got {dt}")));
    }
    Ok((p_prev + p_next - p_curr * 2.0) / (dt * dt))
}

pub fn synthesize_sequence(
    poses: &PoseSequence,
    model: &BodyModel,
    shape: &Shape,
    placements: &[SensorPlacement],
) -> Result<ImuSequence> {
    synthesize_sequence_with(poses, model, shape, placements, &SynthOptions::default())
}

pub fn synthesize_sequence_with(
    poses: &PoseSequence,
    model: &BodyModel,
    shape: &Shape,
    placements: &[SensorPlacement],
    options: &SynthOptions,
) -> Result<ImuSequence> {
    if poses.poses.len() < 3 {
        return Err(Error::validation(format!(
            "need at least 3 pose frames for central differences, got {}",
            poses.poses.len()
        )));
    }
    if !(poses.frame_rate > 0.0 && poses.frame_rate.is_finite()) {
        return Err(Error::validation(format!(
            "frame rate must be positive, got {}",
            poses.frame_rate
        )));
    }
    for (i, p) in placements.iter().enumerate() {
        p.validate(model)?;
        if placements[..i].iter().any(|q| q.name == p.name) {
            return Err(Error::validation(format!("duplicate sensor name {:?}", p.name)));
        }
    }
    let dt = 1.0 / poses.frame_rate;
    let vertices: Vec<usize> = placements.iter().map(|p| p.vertex_index).collect();

    // positions[t][s], orientations[t][s]
    let mut positions = Vec::with_capacity(poses.poses.len());
    let mut orientations = Vec::with_capacity(poses.poses.len());
    for (t, pose) in poses.poses.iter().enumerate() {
        let (posed, global) = pose_vertices(model, shape, pose, &vertices, options.rotation_check)
            .map_err(|e| match e {
                Error::Validation(msg) => Error::validation(format!("frame {t}: {msg}")),
                other => other,
            })?;
        let rots = placements
            .iter()
            .map(|p| virtual_orientation(&global, p))
            .collect::<Result<Vec<_>>>()?;
        positions.push(posed);
        orientations.push(rots);
    }

    let frames = poses.poses.len() - 2;
    let mut sensors: Vec<SensorStream> = placements
        .iter()
        .map(|p| SensorStream {
            name: p.name.clone(),
            orientations: Vec::with_capacity(frames),
            accelerations: Vec::with_capacity(frames),
        })
        .collect();
    for t in 1..poses.poses.len() - 1 {
        for (s, stream) in sensors.iter_mut().enumerate() {
            let mut a = virtual_acceleration(&positions[t - 1][s], &positions[t][s], &positions[t + 1][s], dt)?;
            if let Some(g) = options.gravity {
                a -= g;
            }
            let r = orientations[t][s];
            if options.accel_frame == AccelFrame::Sensor {
                a = r.transpose() * a;
            }
            stream.orientations.push(r);
            stream.accelerations.push(a);
        }
    }
    Ok(ImuSequence {
        frame_rate: poses.frame_rate,
        sensors,
    })
}

/// Adds seeded zero-mean Gaussian noise to every acceleration component.
/// Orientations are left untouched.
pub fn add_acceleration_noise(imu: &ImuSequence, sigma: f64, seed: u64) -> Result<ImuSequence> {
    let bad_sigma = || Error::config(format!("noise sigma must be finite and >= 0, got {sigma}"));
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(bad_sigma());
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| bad_sigma())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = imu.clone();
    for stream in &mut out.sensors {
        for a in &mut stream.accelerations {
            for x in a.iter_mut() {
                *x += normal.sample(&mut rng);
            }
        }
    }
    Ok(out)
}
