//! Generated data: labeled toy-humanoid motions for the CLI pipeline, and
//! plain separable window sets for training experiments.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vimu_core::dataset::Window;
use vimu_core::so3::{rot_x, rot_y, rot_z};
use vimu_core::toy::{toy_humanoid, LEFT_SHOULDER, NECK, RIGHT_HIP};
use vimu_core::{Pose, PoseSequence};

use crate::error::{Error, Result};
use crate::io::{write_body_model, write_pose_sequence, SequenceMeta};

/// Activities of the toy fixture, in label order.
pub const TOY_CLASSES: [&str; 3] = ["arm_swing", "leg_swing", "head_nod"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub per_class: usize,
    pub frames: usize,
    pub frame_rate: f64,
    pub subjects: u32,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            per_class: 6,
            frames: 120,
            frame_rate: 60.0,
            subjects: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSequence {
    /// File stem.
    pub name: String,
    pub meta: SequenceMeta,
    pub poses: PoseSequence,
}

struct Oscillator {
    joint: usize,
    axis: usize,
    amplitude: f64,
    freq_hz: f64,
    phase: f64,
}

fn rotation(axis: usize, angle: f64) -> nalgebra::Matrix3<f64> {
    match axis {
        0 => rot_x(angle),
        1 => rot_y(angle),
        _ => rot_z(angle),
    }
}

/// Main joint and axis of each toy class.
fn primary(class: usize) -> (usize, usize, (f64, f64)) {
    match class {
        0 => (LEFT_SHOULDER, 1, (0.8, 1.4)),
        1 => (RIGHT_HIP, 0, (0.6, 1.1)),
        _ => (NECK, 0, (1.5, 2.5)),
    }
}

pub fn toy_pose_sequences(spec: &FixtureSpec) -> Vec<FixtureSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let joints = toy_humanoid().joint_count();
    let mut out = Vec::with_capacity(TOY_CLASSES.len() * spec.per_class);
    for (class, name) in TOY_CLASSES.iter().enumerate() {
        for i in 0..spec.per_class {
            let (joint, axis, (f_lo, f_hi)) = primary(class);
            let mut osc = vec![Oscillator {
                joint,
                axis,
                amplitude: rng.random_range(0.5..0.9),
                freq_hz: rng.random_range(f_lo..f_hi),
                phase: rng.random_range(0.0..2.0 * PI),
            }];
            // small motion everywhere else
            for j in 1..joints {
                osc.push(Oscillator {
                    joint: j,
                    axis: rng.random_range(0..3),
                    amplitude: rng.random_range(0.02..0.08),
                    freq_hz: rng.random_range(0.3..3.0),
                    phase: rng.random_range(0.0..2.0 * PI),
                });
            }
            let drift = Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0);
            let poses = (0..spec.frames)
                .map(|f| {
                    let t = f as f64 / spec.frame_rate;
                    let mut pose = Pose::identity(joints);
                    for o in &osc {
                        let angle = o.amplitude * (2.0 * PI * o.freq_hz * t + o.phase).sin();
                        pose.joint_rotations[o.joint] *= rotation(o.axis, angle);
                    }
                    pose.root_translation = drift * t;
                    pose
                })
                .collect();
            out.push(FixtureSequence {
                name: format!("{name}_{i:03}"),
                meta: SequenceMeta {
                    label: Some(name.to_string()),
                    subject: Some(i as u32 % spec.subjects.max(1)),
                    source_tag: Some(format!("toy:{name}:{i}")),
                },
                poses: PoseSequence {
                    frame_rate: spec.frame_rate,
                    poses,
                },
            });
        }
    }
    out
}

/// Config matching the files written by [`write_toy_fixture`]: small
/// windows and a small network so the whole pipeline runs in seconds.
pub fn toy_config_text(seed: u64) -> String {
    format!(
        r#"seed = {seed}
lambda = 0.1

labels = ["arm_swing", "leg_swing", "head_nod"]

[paths]
body_model = "toy.vbm"
poses = "poses"

[[sensors]]
name = "left_wrist"
vertex_index = 7
joint_index = 2

[[sensors]]
name = "right_thigh"
vertex_index = 9
joint_index = 3

[[sensors]]
name = "head"
vertex_index = 4
joint_index = 1

[dataset]
window_len = 30
overlap = 0.5
train_fraction = 0.7

[network]
encoder = [
  {{ channels = 8, kernel = 5, stride = 2, padding = 2, activation = "relu" }},
  {{ channels = 8, kernel = 3, stride = 2, padding = 1, activation = "relu" }},
]
hidden = [{{ width = 16, activation = "relu" }}]

[train]
batch_size = 16
epochs = 15
learning_rate = 0.02
validation_fraction = 0.1
"#
    )
}

/// Writes `toy.vbm`, `poses/*.vpose` and `config.toml` into `dir`;
/// returns the config path.
pub fn write_toy_fixture(dir: &Path, spec: &FixtureSpec) -> Result<PathBuf> {
    std::fs::create_dir_all(dir.join("poses")).map_err(|e| Error::io(dir, e))?;
    write_body_model(&dir.join("toy.vbm"), &toy_humanoid())?;
    for seq in toy_pose_sequences(spec) {
        write_pose_sequence(&dir.join("poses").join(format!("{}.vpose", seq.name)), &seq.poses, &seq.meta)?;
    }
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, toy_config_text(spec.seed)).map_err(|e| Error::io(&cfg, e))?;
    Ok(cfg)
}

/// Windows whose class sets both the per-dimension offset and the number of
/// oscillation cycles; amplitude, phase and noise vary per window.
pub fn separable_windows(classes: usize, per_class: usize, frames: usize, dims: usize, seed: u64) -> Vec<Window> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<f64> = (0..classes * dims).map(|_| rng.random_range(-1.0..1.0)).collect();
    let noise = Normal::new(0.0, 0.3).expect("valid sigma");
    let mut out = Vec::with_capacity(classes * per_class);
    for i in 0..classes * per_class {
        // interleave classes so any prefix is balanced
        let label = i % classes;
        let cycles = (label + 1) as f64;
        let amp = rng.random_range(0.8..1.2);
        let mut features = Vec::with_capacity(frames * dims);
        let phases: Vec<f64> = (0..dims).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        for t in 0..frames {
            for d in 0..dims {
                let wave = amp * (2.0 * PI * cycles * t as f64 / frames as f64 + phases[d]).sin();
                features.push(offsets[label * dims + d] + wave + noise.sample(&mut rng));
            }
        }
        out.push(Window {
            frames,
            dims,
            features,
            label,
            subject: (i / classes) as u32 % 4,
        });
    }
    out
}

/// Per-dimension gain and bias, `x ↦ gain·x + bias`.
pub fn shift_domain(windows: &[Window], gain: &[f64], bias: &[f64]) -> Vec<Window> {
    windows
        .iter()
        .map(|w| {
            let mut w = w.clone();
            for (i, x) in w.features.iter_mut().enumerate() {
                let d = i % w.dims;
                *x = gain[d] * *x + bias[d];
            }
            w
        })
        .collect()
}
