//! Readers and writers for body models, pose and IMU sequences, window
//! datasets and checkpoints. All tensors are stored as little-endian `f32`.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vimu_core::dataset::{NormStats, Window};
use vimu_core::model::{EpochRecord, LayerParams, Network, NetworkConfig, NetworkParams, ParamGroup};
use vimu_core::{BodyModel, BodyModelData, ImuSequence, Pose, PoseSequence, SensorStream};

use crate::error::{Error, Result};
use crate::format::{read_file, write_file, PayloadReader, PayloadWriter};

pub const BODY_MODEL_FORMAT: &str = "vimu-body-model";
pub const POSE_FORMAT: &str = "vimu-pose-sequence";
pub const IMU_FORMAT: &str = "vimu-imu-sequence";
pub const DATASET_FORMAT: &str = "vimu-window-dataset";
pub const CHECKPOINT_FORMAT: &str = "vimu-checkpoint";
pub const VERSION: u32 = 1;

/// Labels travel with sequences from pose files to IMU files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_tag: Option<String>,
}

fn push_matrix(w: &mut PayloadWriter, m: &Matrix3<f64>) {
    for r in 0..3 {
        for c in 0..3 {
            w.f32(m[(r, c)]);
        }
    }
}

fn matrix_from_row_major(v: &[f64]) -> Matrix3<f64> {
    Matrix3::from_row_slice(v)
}

// ---- body model ----

#[derive(Debug, Serialize, Deserialize)]
struct BlockEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BodyModelHeader {
    format: String,
    version: u32,
    #[serde(rename = "N")]
    n: usize,
    /// Non-root joint count.
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "B")]
    b: usize,
    #[serde(rename = "P")]
    p: usize,
    parents: Vec<Option<usize>>,
    blocks: Vec<BlockEntry>,
}

pub fn write_body_model(path: &Path, model: &BodyModel) -> Result<()> {
    let d = model.data();
    let n = d.template_vertices.len();
    let j = d.parents.len();
    let (b, p) = (d.num_shape_coeffs, d.num_pose_coeffs);
    let blocks = vec![
        BlockEntry { name: "template_vertices".into(), shape: vec![n, 3] },
        BlockEntry { name: "rest_joint_positions".into(), shape: vec![j, 3] },
        BlockEntry { name: "blend_weights".into(), shape: vec![n, j] },
        BlockEntry { name: "shape_basis".into(), shape: vec![n, 3, b] },
        BlockEntry { name: "pose_basis".into(), shape: vec![n, 3, p] },
    ];
    let header = BodyModelHeader {
        format: BODY_MODEL_FORMAT.into(),
        version: VERSION,
        n,
        k: j - 1,
        b,
        p,
        parents: d.parents.clone(),
        blocks,
    };
    let mut w = PayloadWriter::default();
    for v in &d.template_vertices {
        w.f32s(v.iter());
    }
    for v in &d.rest_joint_positions {
        w.f32s(v.iter());
    }
    w.f32s(&d.blend_weights);
    w.f32s(&d.shape_basis);
    w.f32s(&d.pose_basis);
    write_file(path, &header, &w.into_bytes())
}

pub fn read_body_model(path: &Path) -> Result<BodyModel> {
    let (h, payload): (BodyModelHeader, _) = read_file(path, BODY_MODEL_FORMAT, VERSION)?;
    let j = h.k + 1;
    if h.parents.len() != j {
        return Err(Error::format(
            path,
            format!("header declares K = {} but lists {} parents", h.k, h.parents.len()),
        ));
    }
    let expected = [
        ("template_vertices", vec![h.n, 3]),
        ("rest_joint_positions", vec![j, 3]),
        ("blend_weights", vec![h.n, j]),
        ("shape_basis", vec![h.n, 3, h.b]),
        ("pose_basis", vec![h.n, 3, h.p]),
    ];
    let names: Vec<&str> = h.blocks.iter().map(|b| b.name.as_str()).collect();
    if names != expected.iter().map(|(n, _)| *n).collect::<Vec<_>>() {
        return Err(Error::format(path, format!("unexpected block list {names:?}")));
    }
    for (block, (name, shape)) in h.blocks.iter().zip(&expected) {
        if &block.shape != shape {
            return Err(Error::format(
                path,
                format!("block {name} has shape {:?}, expected {shape:?}", block.shape),
            ));
        }
    }
    let mut r = PayloadReader::new(path, &payload);
    let vecs = |raw: Vec<f64>| raw.chunks_exact(3).map(Vector3::from_column_slice).collect::<Vec<_>>();
    let template_vertices = vecs(r.f32s(h.n * 3, "template_vertices")?);
    let rest_joint_positions = vecs(r.f32s(j * 3, "rest_joint_positions")?);
    let blend_weights = r.f32s(h.n * j, "blend_weights")?;
    let shape_basis = r.f32s(h.n * 3 * h.b, "shape_basis")?;
    let pose_basis = r.f32s(h.n * 3 * h.p, "pose_basis")?;
    r.finish()?;
    Ok(BodyModel::new(BodyModelData {
        template_vertices,
        parents: h.parents,
        rest_joint_positions,
        blend_weights,
        num_shape_coeffs: h.b,
        shape_basis,
        num_pose_coeffs: h.p,
        pose_basis,
    })?)
}

// ---- pose sequences ----

#[derive(Debug, Serialize, Deserialize)]
struct PoseHeader {
    format: String,
    version: u32,
    frame_rate: f64,
    frame_count: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(flatten)]
    meta: SequenceMeta,
}

pub fn write_pose_sequence(path: &Path, seq: &PoseSequence, meta: &SequenceMeta) -> Result<()> {
    let joints = seq.poses.first().map_or(1, |p| p.joint_rotations.len());
    if let Some(bad) = seq.poses.iter().position(|p| p.joint_rotations.len() != joints) {
        return Err(Error::Config(format!(
            "pose {bad} has {} joints, expected {joints}",
            seq.poses[bad].joint_rotations.len()
        )));
    }
    let header = PoseHeader {
        format: POSE_FORMAT.into(),
        version: VERSION,
        frame_rate: seq.frame_rate,
        frame_count: seq.poses.len(),
        k: joints - 1,
        meta: meta.clone(),
    };
    let mut w = PayloadWriter::default();
    for pose in &seq.poses {
        for r in &pose.joint_rotations {
            push_matrix(&mut w, r);
        }
        w.f32s(pose.root_translation.iter());
    }
    write_file(path, &header, &w.into_bytes())
}

pub fn read_pose_sequence(path: &Path) -> Result<(PoseSequence, SequenceMeta)> {
    let (h, payload): (PoseHeader, _) = read_file(path, POSE_FORMAT, VERSION)?;
    let j = h.k + 1;
    let mut r = PayloadReader::new(path, &payload);
    let mut poses = Vec::with_capacity(h.frame_count);
    for _ in 0..h.frame_count {
        let rots = r.f32s(j * 9, "joint rotations")?;
        let t = r.f32s(3, "root translation")?;
        poses.push(Pose {
            joint_rotations: rots.chunks_exact(9).map(matrix_from_row_major).collect(),
            root_translation: Vector3::from_column_slice(&t),
        });
    }
    r.finish()?;
    Ok((
        PoseSequence {
            frame_rate: h.frame_rate,
            poses,
        },
        h.meta,
    ))
}

// ---- IMU sequences ----

#[derive(Debug, Serialize, Deserialize)]
struct ImuHeader {
    format: String,
    version: u32,
    sensors: Vec<String>,
    frame_rate: f64,
    frame_count: usize,
    #[serde(flatten)]
    meta: SequenceMeta,
}

pub fn write_imu_sequence(path: &Path, imu: &ImuSequence, meta: &SequenceMeta) -> Result<()> {
    imu.validate()?;
    let header = ImuHeader {
        format: IMU_FORMAT.into(),
        version: VERSION,
        sensors: imu.sensor_names().into_iter().map(String::from).collect(),
        frame_rate: imu.frame_rate,
        frame_count: imu.frame_count(),
        meta: meta.clone(),
    };
    let mut w = PayloadWriter::default();
    for t in 0..imu.frame_count() {
        for s in &imu.sensors {
            push_matrix(&mut w, &s.orientations[t]);
            w.f32s(s.accelerations[t].iter());
        }
    }
    write_file(path, &header, &w.into_bytes())
}

pub fn read_imu_sequence(path: &Path) -> Result<(ImuSequence, SequenceMeta)> {
    let (h, payload): (ImuHeader, _) = read_file(path, IMU_FORMAT, VERSION)?;
    let mut sensors: Vec<SensorStream> = h
        .sensors
        .iter()
        .map(|name| SensorStream {
            name: name.clone(),
            orientations: Vec::with_capacity(h.frame_count),
            accelerations: Vec::with_capacity(h.frame_count),
        })
        .collect();
    let mut r = PayloadReader::new(path, &payload);
    for _ in 0..h.frame_count {
        for s in &mut sensors {
            let o = r.f32s(9, "orientation")?;
            let a = r.f32s(3, "acceleration")?;
            s.orientations.push(matrix_from_row_major(&o));
            s.accelerations.push(Vector3::from_column_slice(&a));
        }
    }
    r.finish()?;
    let imu = ImuSequence {
        frame_rate: h.frame_rate,
        sensors,
    };
    imu.validate()?;
    Ok((imu, h.meta))
}

// ---- window datasets ----

/// Everything in a dataset header except the bookkeeping fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(rename = "CN")]
    pub num_classes: usize,
    pub labels: Vec<String>,
    pub window_len: usize,
    pub overlap: f64,
    pub dims: usize,
    pub sensor_order: Vec<String>,
    /// Statistics already applied to the features, fitted on the train split.
    pub norm: Option<NormStats>,
    pub seed: u64,
    /// `train`, `test` or free-form.
    pub split: String,
    /// Effective pipeline config that produced the file.
    pub provenance: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowDataset {
    pub meta: DatasetMeta,
    pub windows: Vec<Window>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    format: String,
    version: u32,
    count: usize,
    #[serde(flatten)]
    meta: DatasetMeta,
}

pub fn write_dataset(path: &Path, ds: &WindowDataset) -> Result<()> {
    let m = &ds.meta;
    let mut w = PayloadWriter::default();
    for win in &ds.windows {
        if win.frames != m.window_len || win.dims != m.dims || win.label >= m.num_classes {
            return Err(Error::Config(format!(
                "window {}×{} with label {} does not fit dataset {}×{} with {} classes",
                win.frames, win.dims, win.label, m.window_len, m.dims, m.num_classes
            )));
        }
        w.f32s(&win.features);
        w.i32(win.label as i32);
        w.i32(win.subject as i32);
    }
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: VERSION,
        count: ds.windows.len(),
        meta: m.clone(),
    };
    write_file(path, &header, &w.into_bytes())
}

pub fn read_dataset(path: &Path) -> Result<WindowDataset> {
    let (h, payload): (DatasetHeader, _) = read_file(path, DATASET_FORMAT, VERSION)?;
    let m = h.meta;
    let mut r = PayloadReader::new(path, &payload);
    let mut windows = Vec::with_capacity(h.count);
    for i in 0..h.count {
        let features = r.f32s(m.window_len * m.dims, "window features")?;
        let label = r.i32("label")?;
        let subject = r.i32("subject")?;
        if label < 0 || label as usize >= m.num_classes || subject < 0 {
            return Err(Error::format(
                path,
                format!("window {i}: label {label} / subject {subject} out of range"),
            ));
        }
        windows.push(Window {
            frames: m.window_len,
            dims: m.dims,
            features,
            label: label as usize,
            subject: subject as u32,
        });
    }
    r.finish()?;
    Ok(WindowDataset { meta: m, windows })
}

// ---- checkpoints ----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub supervised: f64,
    pub reconstruction: f64,
    pub total: f64,
    pub train_accuracy: f64,
    pub val_total: Option<f64>,
    pub val_accuracy: Option<f64>,
}

impl From<&EpochRecord> for EpochMetrics {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            supervised: r.supervised,
            reconstruction: r.reconstruction,
            total: r.total,
            train_accuracy: r.train_accuracy,
            val_total: r.val_total,
            val_accuracy: r.val_accuracy,
        }
    }
}

/// Location of one tensor inside the checkpoint payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    /// `encoder`, `classifier` or `decoder`.
    pub group: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the payload.
    pub offset: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub network: NetworkConfig,
    pub seed: u64,
    /// Epoch whose parameters were kept; `None` for an untrained network.
    pub epoch: Option<usize>,
    pub metrics: Option<EpochMetrics>,
    pub labels: Vec<String>,
    pub provenance: Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub seed: u64,
    pub epoch: Option<usize>,
    pub metrics: Option<EpochMetrics>,
    pub labels: Vec<String>,
    pub provenance: Value,
}

fn group_name(g: ParamGroup) -> &'static str {
    match g {
        ParamGroup::Encoder => "encoder",
        ParamGroup::Classifier => "classifier",
        ParamGroup::Decoder => "decoder",
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut w = PayloadWriter::default();
    let mut tensors = Vec::new();
    for t in ckpt.network.params().named_tensors() {
        let offset = w.len();
        w.f32s(t.tensor.data());
        tensors.push(TensorEntry {
            name: t.name,
            group: group_name(t.group).into(),
            shape: t.tensor.shape().to_vec(),
            offset,
            bytes: w.len() - offset,
        });
    }
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: VERSION,
        network: ckpt.network.config().clone(),
        seed: ckpt.seed,
        epoch: ckpt.epoch,
        metrics: ckpt.metrics,
        labels: ckpt.labels.clone(),
        provenance: ckpt.provenance.clone(),
        tensors,
    };
    write_file(path, &header, &w.into_bytes())
}

/// Header and payload without decoding tensors.
pub fn read_checkpoint_raw(path: &Path) -> Result<(CheckpointHeader, Vec<u8>)> {
    read_file(path, CHECKPOINT_FORMAT, VERSION)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let (h, payload) = read_checkpoint_raw(path)?;
    let mut params = NetworkParams::zeros(&h.network)?;
    {
        let mut slots: Vec<&mut LayerParams> = params
            .encoder
            .iter_mut()
            .chain(params.classifier.iter_mut())
            .chain(params.decoder.iter_mut())
            .collect();
        let expected = 2 * slots.len();
        if h.tensors.len() != expected {
            return Err(Error::format(
                path,
                format!("{} tensors listed, network needs {expected}", h.tensors.len()),
            ));
        }
        for (i, entry) in h.tensors.iter().enumerate() {
            let layer = &mut slots[i / 2];
            let (tensor, suffix) = if i % 2 == 0 {
                (&mut layer.weight, "weight")
            } else {
                (&mut layer.bias, "bias")
            };
            let name = format!("W{}.{suffix}", i / 2 + 1);
            if entry.name != name {
                return Err(Error::format(path, format!("tensor {i} is {:?}, expected {name:?}", entry.name)));
            }
            if entry.shape != tensor.shape() {
                return Err(vimu_core::Error::Shape {
                    what: format!("checkpoint tensor {name}"),
                    expected: tensor.shape().to_vec(),
                    actual: entry.shape.clone(),
                }
                .into());
            }
            let end = entry.offset.checked_add(entry.bytes).filter(|&e| e <= payload.len());
            let Some(end) = end.filter(|_| entry.bytes == tensor.len() * 4) else {
                return Err(Error::format(path, format!("tensor {name} has a bad byte range")));
            };
            let mut r = PayloadReader::new(path, &payload[entry.offset..end]);
            let values = r.f32s(tensor.len(), &name)?;
            tensor.data_mut().copy_from_slice(&values);
        }
    }
    let network = Network::from_params(h.network, params)?;
    Ok(Checkpoint {
        network,
        seed: h.seed,
        epoch: h.epoch,
        metrics: h.metrics,
        labels: h.labels,
        provenance: h.provenance,
    })
}
