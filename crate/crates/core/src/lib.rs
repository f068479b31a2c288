//! Virtual IMU synthesis and joint-loss activity recognition, `no_std` core.
//!
//! The crate needs only `alloc`. File formats, configuration and the CLI
//! live in the `vimu` companion crate.

#![no_std]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod kinematics;
pub mod model;
pub mod sensor_synth;
pub mod so3;
pub mod toy;

pub use error::{Error, Result};
pub use kinematics::{BodyModel, BodyModelData, Pose, RigidTransform, RotationCheck, Shape};
pub use sensor_synth::{ImuSequence, PoseSequence, SensorPlacement, SensorStream};
