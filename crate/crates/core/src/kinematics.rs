//! Linear-blend-skinned articulated body.
//!
//! A [`BodyModel`] holds a template mesh, a joint tree with fixed rest joint
//! locations, skinning weights and linear shape/pose blendshape bases. Posing
//! runs in three steps:
//!
//! 1. [`apply_blend_shapes`]: `T + S·β + P·f(θ)` on the template, where
//!    `f(θ)` stacks the row-major entries of `R_j − I` for every non-root
//!    joint (so `P = 9K`, or zero when the model carries no pose basis).
//! 2. [`forward_kinematics`]: global rigid transform of each joint, composed
//!    root to leaf about the rest joint offsets.
//! 3. [`skin`]: each vertex is the weight-blended image of its rest-relative
//!    position under the joint transforms.
//!
//! Rest joint locations do not move with `β`.

use alloc::borrow::Cow;
use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::so3;

/// Tolerance on blend-weight rows summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

/// Raw tensors of a body model, in the layout of the body-model file.
///
/// `blend_weights` is `N × (K+1)` row-major. `shape_basis` is `N × 3 × B`
/// and `pose_basis` is `N × 3 × P`, both with the coefficient index fastest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BodyModelData {
    pub template_vertices: Vec<Vector3<f64>>,
    /// `parents[0]` must be `None`; every other joint names its parent.
    pub parents: Vec<Option<usize>>,
    pub rest_joint_positions: Vec<Vector3<f64>>,
    pub blend_weights: Vec<f64>,
    pub num_shape_coeffs: usize,
    pub shape_basis: Vec<f64>,
    pub num_pose_coeffs: usize,
    pub pose_basis: Vec<f64>,
}

/// A validated skinned body model.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel {
    data: BodyModelData,
    /// Joints ordered so that every parent precedes its children.
    order: Vec<usize>,
}

/// Joint rotations relative to the parent frame plus a root translation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    pub joint_rotations: Vec<Matrix3<f64>>,
    pub root_translation: Vector3<f64>,
}

/// Shape coefficients `β`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Shape {
    pub beta: Vec<f64>,
}

/// A rotation followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// How input rotations are checked before use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationCheck {
    /// Reject any rotation off SO(3) by more than [`so3::ORTHONORMAL_TOL`].
    #[default]
    Strict,
    /// Replace every input rotation by its polar projection.
    Reorthonormalize,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

impl Pose {
    pub fn identity(joint_count: usize) -> Self {
        Self {
            joint_rotations: vec![Matrix3::identity(); joint_count],
            root_translation: Vector3::zeros(),
        }
    }

    pub fn joint_count(&self) -> usize {
        self.joint_rotations.len()
    }

    /// Pose feature vector: row-major `R_j − I` for joints `1..=K`.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(9 * self.joint_count().saturating_sub(1));
        for r in self.joint_rotations.iter().skip(1) {
            let d = r - Matrix3::identity();
            for row in 0..3 {
                for col in 0..3 {
                    out.push(d[(row, col)]);
                }
            }
        }
        out
    }
}

impl Shape {
    pub fn zeros(num_coeffs: usize) -> Self {
        Self {
            beta: vec![0.0; num_coeffs],
        }
    }
}

impl BodyModel {
    pub fn new(data: BodyModelData) -> Result<Self> {
        let n = data.template_vertices.len();
        let joints = data.parents.len();
        if n == 0 {
            return Err(Error::config("template_vertices is empty"));
        }
        if joints == 0 {
            return Err(Error::config("parents is empty: need at least a root joint"));
        }
        if data.rest_joint_positions.len() != joints {
            return Err(Error::shape(
                "rest_joint_positions",
                &[joints, 3],
                &[data.rest_joint_positions.len(), 3],
            ));
        }
        if data.blend_weights.len() != n * joints {
            return Err(Error::shape(
                "blend_weights",
                &[n, joints],
                &[data.blend_weights.len()],
            ));
        }
        let b = data.num_shape_coeffs;
        if data.shape_basis.len() != n * 3 * b {
            return Err(Error::shape(
                "shape_basis",
                &[n, 3, b],
                &[data.shape_basis.len()],
            ));
        }
        let p = data.num_pose_coeffs;
        if p != 0 && p != 9 * (joints - 1) {
            return Err(Error::config(format!(
                "pose_basis has {p} coefficients; expected 0 or 9K = {}",
                9 * (joints - 1)
            )));
        }
        if data.pose_basis.len() != n * 3 * p {
            return Err(Error::shape("pose_basis", &[n, 3, p], &[data.pose_basis.len()]));
        }
        let finite = data
            .template_vertices
            .iter()
            .chain(&data.rest_joint_positions)
            .all(|v| v.iter().all(|x| x.is_finite()))
            && data
                .shape_basis
                .iter()
                .chain(&data.pose_basis)
                .all(|x| x.is_finite());
        if !finite {
            return Err(Error::validation("body model contains non-finite values"));
        }
        for (v, row) in data.blend_weights.chunks_exact(joints).enumerate() {
            if row.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::validation(format!(
                    "blend_weights row {v} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if libm::fabs(sum - 1.0) > WEIGHT_SUM_TOL {
                return Err(Error::validation(format!(
                    "blend_weights row {v} sums to {sum}, not 1"
                )));
            }
        }
        let order = topological_order(&data.parents)?;
        Ok(Self { data, order })
    }

    pub fn data(&self) -> &BodyModelData {
        &self.data
    }

    pub fn vertex_count(&self) -> usize {
        self.data.template_vertices.len()
    }

    /// Number of joints including the root (`K + 1`).
    pub fn joint_count(&self) -> usize {
        self.data.parents.len()
    }

    pub fn num_shape_coeffs(&self) -> usize {
        self.data.num_shape_coeffs
    }

    pub fn num_pose_coeffs(&self) -> usize {
        self.data.num_pose_coeffs
    }

    pub fn template_vertices(&self) -> &[Vector3<f64>] {
        &self.data.template_vertices
    }

    pub fn rest_joint_positions(&self) -> &[Vector3<f64>] {
        &self.data.rest_joint_positions
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.data.parents[joint]
    }

    pub fn blend_weights(&self, vertex: usize) -> &[f64] {
        let k = self.joint_count();
        &self.data.blend_weights[vertex * k..(vertex + 1) * k]
    }

    /// Parent-before-child joint order.
    pub fn joint_order(&self) -> &[usize] {
        &self.order
    }

    fn check_shape(&self, shape: &Shape) -> Result<()> {
        if shape.beta.len() != self.num_shape_coeffs() {
            return Err(Error::shape(
                "shape.beta",
                &[self.num_shape_coeffs()],
                &[shape.beta.len()],
            ));
        }
        if shape.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::validation("shape.beta has non-finite values"));
        }
        Ok(())
    }

    fn check_pose<'a>(&self, pose: &'a Pose, check: RotationCheck) -> Result<Cow<'a, Pose>> {
        if pose.joint_count() != self.joint_count() {
            return Err(Error::shape(
                "pose.joint_rotations",
                &[self.joint_count(), 3, 3],
                &[pose.joint_count(), 3, 3],
            ));
        }
        if pose.root_translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("root_translation is not finite"));
        }
        match check {
            RotationCheck::Strict => {
                for (j, r) in pose.joint_rotations.iter().enumerate() {
                    if !so3::is_rotation(r, so3::ORTHONORMAL_TOL) {
                        return Err(Error::validation(format!(
                            "rotation of joint {j} is not orthonormal (error {:.3e})",
                            so3::orthonormality_error(r)
                        )));
                    }
                }
                Ok(Cow::Borrowed(pose))
            }
            RotationCheck::Reorthonormalize => {
                if pose
                    .joint_rotations
                    .iter()
                    .any(|r| r.iter().any(|x| !x.is_finite()))
                {
                    return Err(Error::validation("pose contains non-finite rotations"));
                }
                Ok(Cow::Owned(Pose {
                    joint_rotations: pose
                        .joint_rotations
                        .iter()
                        .map(so3::project_to_rotation)
                        .collect(),
                    root_translation: pose.root_translation,
                }))
            }
        }
    }

    /// Blendshape-deformed rest position of a single vertex.
    fn deformed_vertex(&self, v: usize, beta: &[f64], pose_features: &[f64]) -> Vector3<f64> {
        let b = self.num_shape_coeffs();
        let p = self.num_pose_coeffs();
        let mut out = self.data.template_vertices[v];
        for axis in 0..3 {
            let shape_row = &self.data.shape_basis[(v * 3 + axis) * b..(v * 3 + axis + 1) * b];
            let mut acc = 0.0;
            for (s, c) in shape_row.iter().zip(beta) {
                acc += s * c;
            }
            if p > 0 {
                let pose_row = &self.data.pose_basis[(v * 3 + axis) * p..(v * 3 + axis + 1) * p];
                for (s, c) in pose_row.iter().zip(pose_features) {
                    acc += s * c;
                }
            }
            out[axis] += acc;
        }
        out
    }

    fn blend(&self, v: usize, rest: &Vector3<f64>, skinning: &[RigidTransform]) -> Vector3<f64> {
        let mut out = Vector3::zeros();
        for (w, xf) in self.blend_weights(v).iter().zip(skinning) {
            if *w != 0.0 {
                out += xf.apply(rest) * *w;
            }
        }
        out
    }
}

fn topological_order(parents: &[Option<usize>]) -> Result<Vec<usize>> {
    let joints = parents.len();
    if parents[0].is_some() {
        return Err(Error::config("joint 0 must be the root (no parent)"));
    }
    let mut children = vec![Vec::new(); joints];
    for (j, p) in parents.iter().enumerate().skip(1) {
        match p {
            None => {
                return Err(Error::config(format!(
                    "joint {j} has no parent; only joint 0 may be a root"
                )))
            }
            Some(p) if *p >= joints || *p == j => {
                return Err(Error::config(format!("joint {j} has invalid parent {p}")))
            }
            Some(p) => children[*p].push(j),
        }
    }
    let mut order = Vec::with_capacity(joints);
    let mut queue = VecDeque::from([0usize]);
    while let Some(j) = queue.pop_front() {
        order.push(j);
        queue.extend(children[j].iter().copied());
    }
    if order.len() != joints {
        return Err(Error::config("joint hierarchy contains a cycle"));
    }
    Ok(order)
}

/// `T + B_s(β) + B_p(θ)` for every vertex.
pub fn apply_blend_shapes(model: &BodyModel, shape: &Shape, pose: &Pose) -> Result<Vec<Vector3<f64>>> {
    model.check_shape(shape)?;
    if pose.joint_count() != model.joint_count() {
        return Err(Error::shape(
            "pose.joint_rotations",
            &[model.joint_count(), 3, 3],
            &[pose.joint_count(), 3, 3],
        ));
    }
    let features = pose.features();
    Ok((0..model.vertex_count())
        .map(|v| model.deformed_vertex(v, &shape.beta, &features))
        .collect())
}

/// Global transform of every joint, with translations at the posed joint
/// locations.
pub fn forward_kinematics(model: &BodyModel, shape: &Shape, pose: &Pose) -> Result<Vec<RigidTransform>> {
    forward_kinematics_with(model, shape, pose, RotationCheck::Strict)
}

pub fn forward_kinematics_with(
    model: &BodyModel,
    shape: &Shape,
    pose: &Pose,
    check: RotationCheck,
) -> Result<Vec<RigidTransform>> {
    model.check_shape(shape)?;
    let pose = model.check_pose(pose, check)?;
    Ok(global_transforms(model, &pose))
}

fn global_transforms(model: &BodyModel, pose: &Pose) -> Vec<RigidTransform> {
    let rest = model.rest_joint_positions();
    let mut global = vec![RigidTransform::identity(); model.joint_count()];
    for &j in model.joint_order() {
        let rotation = pose.joint_rotations[j];
        global[j] = match model.parent(j) {
            None => RigidTransform {
                rotation,
                translation: rest[j] + pose.root_translation,
            },
            Some(p) => global[p].compose(&RigidTransform {
                rotation,
                translation: rest[j] - rest[p],
            }),
        };
    }
    global
}

/// Turns global joint transforms into the transforms applied to rest-pose
/// vertices: `G_j ∘ translate(−J_j)`.
pub fn skinning_transforms(model: &BodyModel, global: &[RigidTransform]) -> Vec<RigidTransform> {
    global
        .iter()
        .zip(model.rest_joint_positions())
        .map(|(g, j)| RigidTransform {
            rotation: g.rotation,
            translation: g.translation - g.rotation * j,
        })
        .collect()
}

/// Posed vertices of the whole mesh.
pub fn skin(model: &BodyModel, shape: &Shape, pose: &Pose) -> Result<Vec<Vector3<f64>>> {
    let global = forward_kinematics(model, shape, pose)?;
    let deformed = apply_blend_shapes(model, shape, pose)?;
    Ok(skin_with_transforms(model, &deformed, &global))
}

/// Blend already-deformed rest vertices under arbitrary global joint
/// transforms.
pub fn skin_with_transforms(
    model: &BodyModel,
    deformed: &[Vector3<f64>],
    global: &[RigidTransform],
) -> Vec<Vector3<f64>> {
    let skinning = skinning_transforms(model, global);
    deformed
        .iter()
        .enumerate()
        .map(|(v, rest)| model.blend(v, rest, &skinning))
        .collect()
}

/// Posed positions of selected vertices plus the global joint transforms.
///
/// Same result as [`skin`] restricted to `vertices`, without deforming the
/// rest of the mesh.
pub fn pose_vertices(
    model: &BodyModel,
    shape: &Shape,
    pose: &Pose,
    vertices: &[usize],
    check: RotationCheck,
) -> Result<(Vec<Vector3<f64>>, Vec<RigidTransform>)> {
    model.check_shape(shape)?;
    let pose = model.check_pose(pose, check)?;
    if let Some(bad) = vertices.iter().find(|v| **v >= model.vertex_count()) {
        return Err(Error::validation(format!(
            "vertex index {bad} out of range (model has {})",
            model.vertex_count()
        )));
    }
    let global = global_transforms(model, &pose);
    let skinning = skinning_transforms(model, &global);
    let features = pose.features();
    let posed = vertices
        .iter()
        .map(|&v| {
            let rest = model.deformed_vertex(v, &shape.beta, &features);
            model.blend(v, &rest, &skinning)
        })
        .collect();
    Ok((posed, global))
}
