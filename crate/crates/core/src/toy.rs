//! Built-in 12-vertex, 4-joint humanoid used by tests and demos.
//!
//! Joints: 0 pelvis (root), 1 neck, 2 left shoulder (child of neck),
//! 3 right hip (child of pelvis). Z is up, units are meters. Two shape
//! coefficients (height, width) and a full `9K = 27` pose basis.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::kinematics::{BodyModel, BodyModelData};
use crate::sensor_synth::SensorPlacement;

pub const PELVIS: usize = 0;
pub const NECK: usize = 1;
pub const LEFT_SHOULDER: usize = 2;
pub const RIGHT_HIP: usize = 3;

pub const HEAD_VERTEX: usize = 4;
pub const LEFT_WRIST_VERTEX: usize = 7;
pub const RIGHT_THIGH_VERTEX: usize = 9;

/// Vertex positions and their skinning weights over the 4 joints. Weights are
/// dyadic so they survive a float32 round trip with an exact unit sum.
const VERTICES: [([f64; 3], [f64; 4]); 12] = [
    ([0.0, 0.1, 1.0], [1.0, 0.0, 0.0, 0.0]),
    ([0.15, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0]),
    ([-0.15, 0.0, 1.0], [0.5, 0.0, 0.0, 0.5]),
    ([0.0, 0.1, 1.35], [0.5, 0.5, 0.0, 0.0]),
    ([0.0, 0.0, 1.75], [0.0, 1.0, 0.0, 0.0]),
    ([0.0, 0.1, 1.65], [0.0, 1.0, 0.0, 0.0]),
    ([0.45, 0.0, 1.45], [0.0, 0.25, 0.75, 0.0]),
    ([0.7, 0.0, 1.45], [0.0, 0.0, 1.0, 0.0]),
    ([0.8, 0.0, 1.45], [0.0, 0.0, 1.0, 0.0]),
    ([-0.1, 0.05, 0.75], [0.0, 0.0, 0.0, 1.0]),
    ([-0.1, 0.0, 0.55], [0.0, 0.0, 0.0, 1.0]),
    ([-0.1, 0.1, 0.1], [0.0, 0.0, 0.0, 1.0]),
];

const JOINTS: [[f64; 3]; 4] = [
    [0.0, 0.0, 1.0],
    [0.0, 0.0, 1.5],
    [0.2, 0.0, 1.45],
    [-0.1, 0.0, 0.95],
];

pub fn toy_humanoid() -> BodyModel {
    let n = VERTICES.len();
    let b = 2;
    let p = 9 * (JOINTS.len() - 1);
    let mut shape_basis = vec![0.0; n * 3 * b];
    let mut pose_basis = vec![0.0; n * 3 * p];
    for (v, (pos, _)) in VERTICES.iter().enumerate() {
        // height: stretch about the pelvis; width: stretch along x
        shape_basis[(v * 3 + 2) * b] = 0.0625 * (pos[2] - 1.0);
        shape_basis[v * 3 * b + 1] = 0.0625 * pos[0];
        for axis in 0..3 {
            for k in 0..p {
                let phase = (v * 31 + axis * 7 + k * 3) as f64;
                pose_basis[(v * 3 + axis) * p + k] = 1e-3 * libm::sin(phase);
            }
        }
    }
    BodyModel::new(BodyModelData {
        template_vertices: VERTICES.iter().map(|(p, _)| Vector3::from(*p)).collect(),
        parents: vec![None, Some(PELVIS), Some(NECK), Some(PELVIS)],
        rest_joint_positions: JOINTS.iter().map(|p| Vector3::from(*p)).collect(),
        blend_weights: VERTICES.iter().flat_map(|(_, w)| *w).collect(),
        num_shape_coeffs: b,
        shape_basis,
        num_pose_coeffs: p,
        pose_basis,
    })
    .expect("toy humanoid is valid")
}

/// Left wrist, right thigh, head: the three-sensor layout.
pub fn toy_placements() -> Vec<SensorPlacement> {
    vec![
        SensorPlacement {
            name: String::from("left_wrist"),
            vertex_index: LEFT_WRIST_VERTEX,
            joint_index: LEFT_SHOULDER,
            local_rotation_offset: Matrix3::identity(),
        },
        SensorPlacement {
            name: String::from("right_thigh"),
            vertex_index: RIGHT_THIGH_VERTEX,
            joint_index: RIGHT_HIP,
            local_rotation_offset: Matrix3::identity(),
        },
        SensorPlacement {
            name: String::from("head"),
            vertex_index: HEAD_VERTEX,
            joint_index: NECK,
            local_rotation_offset: Matrix3::identity(),
        },
    ]
}
