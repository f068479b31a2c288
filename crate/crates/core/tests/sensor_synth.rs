use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use vimu_core::sensor_synth::{synthesize_sequence, synthesize_sequence_with, AccelFrame, SynthOptions};
use vimu_core::so3::rot_z;
use vimu_core::toy::{toy_humanoid, toy_placements};
use vimu_core::{BodyModel, BodyModelData, Pose, PoseSequence, SensorPlacement, Shape};

fn single_point() -> BodyModel {
    BodyModel::new(BodyModelData {
        template_vertices: vec![Vector3::new(0.2, -0.1, 0.4)],
        parents: vec![None],
        rest_joint_positions: vec![Vector3::zeros()],
        blend_weights: vec![1.0],
        num_shape_coeffs: 0,
        shape_basis: vec![],
        num_pose_coeffs: 0,
        pose_basis: vec![],
    })
    .unwrap()
}

fn placement() -> Vec<SensorPlacement> {
    vec![SensorPlacement {
        name: "p".into(),
        vertex_index: 0,
        joint_index: 0,
        local_rotation_offset: Matrix3::identity(),
    }]
}

/// Root following `a·t² + b·t` sampled at `rate` for `frames` frames.
fn quadratic(a: Vector3<f64>, b: Vector3<f64>, rate: f64, frames: usize) -> PoseSequence {
    PoseSequence {
        frame_rate: rate,
        poses: (0..frames)
            .map(|i| {
                let t = i as f64 / rate;
                Pose {
                    joint_rotations: vec![Matrix3::identity()],
                    root_translation: a * t * t + b * t,
                }
            })
            .collect(),
    }
}

fn vec3() -> impl Strategy<Value = Vector3<f64>> {
    (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

proptest! {
    #[test]
    fn quadratic_motion_is_differentiated_exactly(a in vec3(), b in vec3(), rate in 10.0f64..240.0) {
        let imu = synthesize_sequence(&quadratic(a, b, rate, 8), &single_point(), &Shape::zeros(0), &placement()).unwrap();
        prop_assert_eq!(imu.frame_count(), 6);
        for acc in &imu.sensors[0].accelerations {
            prop_assert!((acc - 2.0 * a).norm() < 1e-6 * (1.0 + a.norm()));
        }
    }
}

#[test]
fn acceleration_does_not_depend_on_frame_rate() {
    let a = Vector3::new(1.0, -2.0, 0.5);
    let b = Vector3::new(0.3, 0.0, 1.0);
    let slow = synthesize_sequence(&quadratic(a, b, 30.0, 10), &single_point(), &Shape::zeros(0), &placement()).unwrap();
    let fast = synthesize_sequence(&quadratic(a, b, 120.0, 40), &single_point(), &Shape::zeros(0), &placement()).unwrap();
    let s = slow.sensors[0].accelerations[3];
    let f = fast.sensors[0].accelerations[20];
    assert!((s - f).norm() < 1e-6);
}

#[test]
fn three_frames_give_one_reading() {
    let imu = synthesize_sequence(
        &quadratic(Vector3::x(), Vector3::zeros(), 60.0, 3),
        &single_point(),
        &Shape::zeros(0),
        &placement(),
    )
    .unwrap();
    assert_eq!(imu.frame_count(), 1);
    let two = quadratic(Vector3::x(), Vector3::zeros(), 60.0, 2);
    assert!(synthesize_sequence(&two, &single_point(), &Shape::zeros(0), &placement()).is_err());
}

#[test]
fn gravity_and_sensor_frame_options() {
    let a = Vector3::new(1.0, 0.0, 0.0);
    let mut seq = quadratic(a, Vector3::zeros(), 60.0, 5);
    for p in &mut seq.poses {
        p.joint_rotations[0] = rot_z(std::f64::consts::FRAC_PI_2);
    }
    let g = Vector3::new(0.0, 0.0, -9.81);
    let opts = SynthOptions {
        accel_frame: AccelFrame::Sensor,
        gravity: Some(g),
        ..SynthOptions::default()
    };
    let imu = synthesize_sequence_with(&seq, &single_point(), &Shape::zeros(0), &placement(), &opts).unwrap();
    let r = imu.sensors[0].orientations[0];
    let expect = r.transpose() * (2.0 * a - g);
    assert!((imu.sensors[0].accelerations[0] - expect).norm() < 1e-6);
}

#[test]
fn still_humanoid_reads_zero_acceleration() {
    let seq = PoseSequence {
        frame_rate: 60.0,
        poses: vec![Pose::identity(4); 6],
    };
    let imu = synthesize_sequence(&seq, &toy_humanoid(), &Shape::zeros(2), &toy_placements()).unwrap();
    assert_eq!(imu.sensors.len(), 3);
    for s in &imu.sensors {
        assert!(s.accelerations.iter().all(|a| a.norm() < 1e-9));
        assert!(s.orientations.iter().all(|r| (r - Matrix3::identity()).norm() < 1e-12));
    }
}
