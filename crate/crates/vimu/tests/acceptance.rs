//! Acceptance criteria 1–8. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use vimu::fixture::{separable_windows, shift_domain, write_toy_fixture, FixtureSpec};
use vimu::io::{read_checkpoint, read_checkpoint_raw, write_checkpoint, Checkpoint};
use vimu_core::dataset::{normalize_apply, normalize_fit, segment_windows, split, FeatureMatrix, SplitMode, Window};
use vimu_core::evaluation::{accuracy, f1_micro, ConfusionMatrix};
use vimu_core::kinematics::{forward_kinematics, skin};
use vimu_core::model::{
    evaluate, fine_tune, predict_all, train, Activation, ConvSpec, DenseSpec, Network, NetworkConfig,
    OutputSquash, Serial, Tensor, TrainConfig,
};
use vimu_core::sensor_synth::synthesize_sequence;
use vimu_core::so3::axis_angle;
use vimu_core::toy::{toy_humanoid, toy_placements};
use vimu_core::{BodyModel, BodyModelData, Pose, PoseSequence, SensorPlacement, Shape};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    );
    axis_angle(axis, rng.random_range(-PI..PI))
}

// ---------------------------------------------------------------- 1

fn gradcheck_config(lambda: f64, output: OutputSquash) -> NetworkConfig {
    NetworkConfig {
        input_frames: 12,
        input_dims: 4,
        num_classes: 3,
        encoder: vec![
            ConvSpec::same(4, 3, 2, Activation::Tanh),
            ConvSpec::same(6, 3, 2, Activation::Tanh),
        ],
        classifier: vec![
            DenseSpec {
                width: 8,
                activation: Activation::Tanh,
            },
            DenseSpec {
                width: 3,
                activation: Activation::Identity,
            },
        ],
        decoder_activations: vec![Activation::Tanh, Activation::Identity],
        output,
        lambda,
    }
}

/// Largest `|a − n| / max(|a|, |n|, 1e-5)` over all parameters.
fn gradient_error(seed: u64, lambda: f64, output: OutputSquash) -> Result<(f64, usize), String> {
    const EPS: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = ok(Network::new(gradcheck_config(lambda, output), seed))?;
    // move away from zero biases so every term is exercised
    for (_, t) in net.params_mut().tensors_mut() {
        for v in t.data_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += 0.1 * z;
        }
    }
    let batch = 3;
    let x = ok(Tensor::new(
        vec![batch, 12, 4],
        (0..batch * 48).map(|_| StandardNormal.sample(&mut rng)).collect(),
    ))?;
    let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..3)).collect();
    let (_, grads) = ok(net.backward(&x, &labels, lambda))?;
    let analytic: Vec<Vec<f64>> = grads
        .named_tensors()
        .iter()
        .map(|t| t.tensor.data().to_vec())
        .collect();

    let mut worst = 0.0f64;
    let mut count = 0;
    for (ti, a_t) in analytic.iter().enumerate() {
        for (e, &a) in a_t.iter().enumerate() {
            let orig = net.params().named_tensors()[ti].tensor.data()[e];
            let mut loss_at = |v: f64| -> Result<f64, String> {
                net.params_mut().tensors_mut()[ti].1.data_mut()[e] = v;
                Ok(ok(net.joint_loss(&x, &labels, lambda))?.total)
            };
            let plus = loss_at(orig + EPS)?;
            let minus = loss_at(orig - EPS)?;
            loss_at(orig)?;
            let n = (plus - minus) / (2.0 * EPS);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-5);
            worst = worst.max(rel);
            count += 1;
        }
    }
    Ok((worst, count))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let params = ok(Network::new(gradcheck_config(0.1, OutputSquash::Softmax), 0))?
        .params()
        .parameter_count();
    ensure!(params <= 5000, "toy network has {params} parameters");
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..10 {
        for lambda in [0.0, 0.1, 1.0] {
            let (err, n) = gradient_error(seed, lambda, OutputSquash::Softmax)?;
            ensure!(err < 1e-3, "seed {seed}, lambda {lambda}: relative error {err:.3e}");
            worst = worst.max(err);
            checked += n;
        }
    }
    // the literal squared error on raw scores as well
    for seed in 0..2 {
        let (err, n) = gradient_error(100 + seed, 0.1, OutputSquash::Linear)?;
        ensure!(err < 1e-3, "linear output, seed {seed}: relative error {err:.3e}");
        worst = worst.max(err);
        checked += n;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "{params} params, {checked} partials, max rel err {worst:.2e}, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 2

fn point_model() -> BodyModel {
    BodyModel::new(BodyModelData {
        template_vertices: vec![Vector3::new(0.3, -0.2, 0.5)],
        parents: vec![None],
        rest_joint_positions: vec![Vector3::zeros()],
        blend_weights: vec![1.0],
        num_shape_coeffs: 0,
        shape_basis: vec![],
        num_pose_coeffs: 0,
        pose_basis: vec![],
    })
    .expect("valid single-joint model")
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let models = [
        (point_model(), vec![SensorPlacement {
            name: "p".into(),
            vertex_index: 0,
            joint_index: 0,
            local_rotation_offset: Matrix3::identity(),
        }]),
        (toy_humanoid(), toy_placements()),
    ];
    for rate in [30.0, 60.0, 120.0] {
        let dt = 1.0 / rate;
        for (model, placements) in &models {
            for _ in 0..5 {
                let v = |rng: &mut ChaCha8Rng| Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let (a, b, c) = (v(&mut rng), v(&mut rng), v(&mut rng) * 5.0);
                // a fixed, non-trivial body posture carried rigidly along p(t)
                let mut base = Pose::identity(model.joint_count());
                for r in &mut base.joint_rotations {
                    *r = random_rotation(&mut rng);
                }
                let poses = (0..40)
                    .map(|i| {
                        let t = i as f64 * dt;
                        let mut p = base.clone();
                        p.root_translation = a + b * t + c * (0.5 * t * t);
                        p
                    })
                    .collect();
                let seq = PoseSequence {
                    frame_rate: rate,
                    poses,
                };
                let imu = ok(synthesize_sequence(
                    &seq,
                    model,
                    &Shape::zeros(model.num_shape_coeffs()),
                    placements,
                ))?;
                ensure!(imu.frame_count() == 38, "expected 38 frames, got {}", imu.frame_count());
                for s in &imu.sensors {
                    for acc in &s.accelerations {
                        worst = worst.max((acc - c).amax());
                    }
                }
            }
        }
    }
    ensure!(worst < 1e-6, "max deviation from c: {worst:.3e}");
    Ok(format!("dt ∈ {{1/30, 1/60, 1/120}}, max |a − c| = {worst:.2e}"))
}

// ---------------------------------------------------------------- 3

fn random_model(rng: &mut ChaCha8Rng, joints: usize, vertices: usize) -> BodyModel {
    let mut order: Vec<usize> = (1..joints).collect();
    order.shuffle(rng);
    let mut parents = vec![None; joints];
    let mut placed = vec![0];
    for &j in &order {
        parents[j] = Some(placed[rng.random_range(0..placed.len())]);
        placed.push(j);
    }
    let v3 = |rng: &mut ChaCha8Rng| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let template_vertices = (0..vertices).map(|_| v3(rng)).collect();
    let rest_joint_positions = (0..joints).map(|_| v3(rng)).collect();
    let mut blend_weights = Vec::with_capacity(vertices * joints);
    for _ in 0..vertices {
        let raw: Vec<f64> = (0..joints).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
        let s: f64 = raw.iter().sum();
        blend_weights.extend(raw.iter().map(|w| w / s));
    }
    let b = 2;
    let p = 9 * (joints - 1);
    BodyModel::new(BodyModelData {
        template_vertices,
        parents,
        rest_joint_positions,
        blend_weights,
        num_shape_coeffs: b,
        shape_basis: (0..vertices * 3 * b).map(|_| rng.random_range(-0.1..0.1)).collect(),
        num_pose_coeffs: p,
        pose_basis: (0..vertices * 3 * p).map(|_| rng.random_range(-0.1..0.1)).collect(),
    })
    .expect("random model is valid")
}

fn homogeneous(r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m
}

/// `G_j = G_parent · [R_j | J_j − J_parent]`, root `[R_0 | J_0 + t]`, by
/// recursion on the parent chain.
fn oracle_global(model: &BodyModel, pose: &Pose, j: usize) -> Matrix4<f64> {
    let rest = model.rest_joint_positions();
    match model.parent(j) {
        None => homogeneous(&pose.joint_rotations[j], &(rest[j] + pose.root_translation)),
        Some(p) => oracle_global(model, pose, p) * homogeneous(&pose.joint_rotations[j], &(rest[j] - rest[p])),
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_skin = 0.0f64;
    let mut worst_fk = 0.0f64;
    let toy = toy_humanoid();
    let posed = ok(skin(&toy, &Shape::zeros(toy.num_shape_coeffs()), &Pose::identity(toy.joint_count())))?;
    for (a, b) in posed.iter().zip(toy.template_vertices()) {
        worst_skin = worst_skin.max((a - b).amax());
    }
    for _ in 0..100 {
        let joints = rng.random_range(1..=8);
        let model = random_model(&mut rng, joints, 10);
        let shape = Shape {
            beta: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        };
        let rest = ok(skin(&model, &Shape::zeros(2), &Pose::identity(joints)))?;
        for (a, b) in rest.iter().zip(model.template_vertices()) {
            worst_skin = worst_skin.max((a - b).amax());
        }
        let pose = Pose {
            joint_rotations: (0..joints).map(|_| random_rotation(&mut rng)).collect(),
            root_translation: Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        };
        let global = ok(forward_kinematics(&model, &shape, &pose))?;
        for (j, g) in global.iter().enumerate() {
            let diff = (homogeneous(&g.rotation, &g.translation) - oracle_global(&model, &pose, j)).amax();
            worst_fk = worst_fk.max(diff);
        }
    }
    ensure!(worst_skin < 1e-10, "identity skinning off by {worst_skin:.3e}");
    ensure!(worst_fk < 1e-10, "forward kinematics off by {worst_fk:.3e}");
    Ok(format!(
        "identity skin err {worst_skin:.1e}, FK vs 4×4 oracle on 100 trees err {worst_fk:.1e}"
    ))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let windows_for = |frames: usize, len: usize, overlap: f64| {
        let m = FeatureMatrix {
            frames,
            dims: 2,
            data: (0..frames * 2).map(|i| i as f64).collect(),
        };
        segment_windows(&m, len, overlap, 0, 0)
    };
    let reference_case = windows_for(150, 60, 0.5).len();
    ensure!(reference_case == 4, "150 frames / 60 / 50% gave {reference_case} windows");
    for _ in 0..1000 {
        let frames = rng.random_range(0..400);
        let len = rng.random_range(1..120);
        let overlap = rng.random_range(0.0..0.95);
        let stride = ((len as f64 * (1.0 - overlap)).round() as usize).max(1);
        let expected = if frames < len { 0 } else { (frames - len) / stride + 1 };
        let got = windows_for(frames, len, overlap);
        ensure!(
            got.len() == expected,
            "T={frames} W={len} overlap={overlap}: {} windows, formula says {expected}",
            got.len()
        );
        for (i, w) in got.iter().enumerate() {
            ensure!(w.features[0] == (2 * i * stride) as f64, "window {i} starts at the wrong frame");
        }
    }
    Ok("1000 random (T, W, overlap) triples match floor((T−W)/S)+1; 150/60/50% → 4".into())
}

// ---------------------------------------------------------------- 5

#[derive(Default, Clone, Copy)]
struct Counts {
    tp: u64,
    fp: u64,
    fn_: u64,
    tn: u64,
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..200 {
        let n = rng.random_range(1..=6);
        let mut pairs = Vec::new();
        let mut counts = vec![0u64; n * n];
        while pairs.is_empty() {
            for t in 0..n {
                for p in 0..n {
                    let c = if t == p { rng.random_range(0..30) } else { rng.random_range(0..8) };
                    counts[t * n + p] = c;
                    pairs.extend(std::iter::repeat_n((t, p), c as usize));
                }
            }
        }
        pairs.shuffle(&mut rng);
        // brute-force one-vs-rest counting over individual samples
        let mut oracle = vec![Counts::default(); n];
        for &(t, p) in &pairs {
            for (c, o) in oracle.iter_mut().enumerate() {
                match (t == c, p == c) {
                    (true, true) => o.tp += 1,
                    (false, true) => o.fp += 1,
                    (true, false) => o.fn_ += 1,
                    (false, false) => o.tn += 1,
                }
            }
        }
        let cm = ok(ConfusionMatrix::from_counts(n, counts))?;
        for (c, o) in oracle.iter().enumerate() {
            let got = cm.one_vs_rest(c);
            ensure!(
                (got.tp, got.fp, got.fn_, got.tn) == (o.tp, o.fp, o.fn_, o.tn),
                "case {case}, class {c}: one-vs-rest counts differ"
            );
            let m = cm.class_metrics(c);
            let prec = (o.tp + o.fp > 0).then(|| o.tp as f64 / (o.tp + o.fp) as f64);
            let rec = (o.tp + o.fn_ > 0).then(|| o.tp as f64 / (o.tp + o.fn_) as f64);
            ensure!(m.precision == prec && m.recall == rec, "case {case}, class {c}: precision/recall differ");
        }
        let sum = oracle.iter().fold(Counts::default(), |a, o| Counts {
            tp: a.tp + o.tp,
            fp: a.fp + o.fp,
            fn_: a.fn_ + o.fn_,
            tn: a.tn + o.tn,
        });
        let ovr = (sum.tp + sum.tn) as f64 / (sum.tp + sum.tn + sum.fp + sum.fn_) as f64;
        let f1 = (2 * sum.tp) as f64 / (2 * sum.tp + sum.fp + sum.fn_) as f64;
        let acc = ok(accuracy(&cm))?;
        let got_f1 = ok(f1_micro(&cm))?;
        ensure!(acc.one_vs_rest == ovr, "case {case}: one-vs-rest accuracy {} vs oracle {ovr}", acc.one_vs_rest);
        ensure!(got_f1 == f1, "case {case}: micro-F1 {got_f1} vs oracle {f1}");
        let plain = cm.trace() as f64 / cm.total() as f64;
        ensure!(acc.plain == plain, "case {case}: plain accuracy differs");
        ensure!(got_f1 == plain, "case {case}: micro-F1 {got_f1} != trace/total {plain}");
    }
    Ok("200 random matrices (CN ≤ 6): counts, one-vs-rest accuracy, micro-F1 match; micro-F1 == trace/total exactly".into())
}

// ---------------------------------------------------------------- 6

const C6_FRAMES: usize = 30;
const C6_DIMS: usize = 6;

fn small_config(frames: usize, dims: usize, classes: usize, lambda: f64) -> NetworkConfig {
    NetworkConfig {
        input_frames: frames,
        input_dims: dims,
        num_classes: classes,
        encoder: vec![
            ConvSpec::same(8, 5, 2, Activation::Relu),
            ConvSpec::same(16, 3, 2, Activation::Relu),
        ],
        classifier: vec![
            DenseSpec {
                width: 32,
                activation: Activation::Relu,
            },
            DenseSpec {
                width: classes,
                activation: Activation::Identity,
            },
        ],
        decoder_activations: vec![Activation::Relu, Activation::Identity],
        output: OutputSquash::Softmax,
        lambda,
    }
}

fn accuracy_of(net: &Network, windows: &[Window]) -> Result<f64, String> {
    let preds = ok(predict_all(net, windows))?;
    let hits = preds.iter().zip(windows).filter(|(p, w)| **p == w.label).count();
    Ok(hits as f64 / windows.len() as f64)
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let windows = separable_windows(3, 200, C6_FRAMES, C6_DIMS, 6);
    ensure!(windows.len() == 600, "expected 600 windows");
    let s = ok(split(windows, 0.7, 6, SplitMode::Stratified))?;
    let stats = ok(normalize_fit(&s.train))?;
    let train_w = ok(normalize_apply(&s.train, &stats))?;
    let test_w = ok(normalize_apply(&s.test, &stats))?;
    let mut cfg = TrainConfig::with_seed(6, 200);
    cfg.batch_size = 32;
    cfg.learning_rate = 0.02;
    let run = || train(small_config(C6_FRAMES, C6_DIMS, 3, 0.1), &train_w, None, &cfg, &Serial);
    let first = ok(run())?;
    let acc = accuracy_of(&first.network, &test_w)?;
    let second = ok(run())?;
    ensure!(first == second, "two runs with the same seed differ");
    let elapsed = start.elapsed();
    ensure!(acc >= 0.95, "test accuracy {acc:.4} < 0.95");
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "test accuracy {acc:.4} on {} windows after {} epochs, bit-identical rerun, {:.1}s",
        test_w.len(),
        cfg.epochs,
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 7

fn byte_ranges(path: &Path, group: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let (h, payload) = ok(read_checkpoint_raw(path))?;
    Ok(h.tensors
        .iter()
        .filter(|t| t.group == group)
        .map(|t| (t.name.clone(), payload[t.offset..t.offset + t.bytes].to_vec()))
        .collect())
}

fn criterion_7() -> Outcome {
    const FRAMES: usize = 30;
    const DIMS: usize = 6;
    let dir = ok(tempfile::tempdir())?;
    // one generator, so both domains share the class structure
    let all = separable_windows(3, 300, FRAMES, DIMS, 7);
    let (virtual_w, real_w) = all.split_at(600);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let gain: Vec<f64> = (0..DIMS).map(|_| rng.random_range(2.0..4.0)).collect();
    let bias: Vec<f64> = (0..DIMS).map(|_| rng.random_range(-6.0..6.0)).collect();
    let real_w = shift_domain(real_w, &gain, &bias);
    let real = ok(split(real_w, 0.5, 7, SplitMode::Stratified))?;

    let mut pre_cfg = TrainConfig::with_seed(7, 40);
    pre_cfg.batch_size = 32;
    pre_cfg.learning_rate = 0.02;
    let pre = ok(train(small_config(FRAMES, DIMS, 3, 0.1), virtual_w, None, &pre_cfg, &Serial))?;
    let pre_path = dir.path().join("pretrained.vckpt");
    let ckpt = |network: Network, epoch| Checkpoint {
        network,
        seed: 7,
        epoch,
        metrics: None,
        labels: vec!["a".into(), "b".into(), "c".into()],
        provenance: serde_json::Value::Null,
    };
    ok(write_checkpoint(&pre_path, &ckpt(pre.network, pre.best_epoch)))?;
    let pretrained = ok(read_checkpoint(&pre_path))?.network;

    let virtual_acc = accuracy_of(&pretrained, virtual_w)?;
    let control = accuracy_of(&pretrained, &real.test)?;

    let mut ft_cfg = TrainConfig::with_seed(7, vimu_core::model::DEFAULT_FINE_TUNE_EPOCHS);
    ft_cfg.batch_size = 16;
    ft_cfg.learning_rate = 0.01;
    let tuned = ok(fine_tune(pretrained.clone(), &real.train, None, &ft_cfg, &Serial))?;
    let ft_path = dir.path().join("finetuned.vckpt");
    ok(write_checkpoint(&ft_path, &ckpt(tuned.network, tuned.best_epoch)))?;
    let tuned = ok(read_checkpoint(&ft_path))?.network;
    let tuned_acc = accuracy_of(&tuned, &real.test)?;

    for group in ["encoder", "decoder"] {
        let a = byte_ranges(&pre_path, group)?;
        let b = byte_ranges(&ft_path, group)?;
        ensure!(!a.is_empty() && a == b, "{group} bytes changed during fine-tuning");
    }
    let cls_a = byte_ranges(&pre_path, "classifier")?;
    ensure!(cls_a != byte_ranges(&ft_path, "classifier")?, "classifier did not change");
    let gap = tuned_acc - control;
    ensure!(gap >= 0.10, "fine-tuned {tuned_acc:.4} vs control {control:.4}: gap {gap:.4} < 0.10");
    ensure!(control < tuned_acc, "control {control:.4} not below fine-tuned {tuned_acc:.4}");
    let _ = evaluate(&tuned, &real.test, &Serial).map_err(|e| e.to_string())?;
    Ok(format!(
        "virtual acc {virtual_acc:.4}; shifted domain: direct transfer {control:.4}, FC-only fine-tune {tuned_acc:.4} (+{:.1} pts); encoder/decoder bytes unchanged",
        100.0 * gap
    ))
}

// ---------------------------------------------------------------- 8

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn run_pipeline(config: &Path, out: &Path, threads: &str) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_vimu");
    let metrics = out.join("reports").join("pretrained").join("metrics.json");
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into()],
        vec!["preprocess".into()],
        vec!["train".into()],
        vec!["finetune".into()],
        vec!["eval".into()],
        vec![
            "eval".into(),
            "--checkpoint".into(),
            out.join("model").join("finetuned.vckpt").display().to_string(),
        ],
        vec!["report".into(), "--metrics".into(), metrics.display().to_string()],
    ];
    for step in steps {
        let status = Command::new(bin)
            .arg("--config")
            .arg(config)
            .arg("--out")
            .arg(out)
            .args(["--threads", threads])
            .args(&step)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            status.status.success(),
            "`vimu {}` failed: {}",
            step.join(" "),
            String::from_utf8_lossy(&status.stderr)
        );
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let spec = FixtureSpec {
        seed: 8,
        per_class: 4,
        frames: 90,
        ..FixtureSpec::default()
    };
    let config = ok(write_toy_fixture(&dir.path().join("fixture"), &spec))?;
    let (a, b) = (dir.path().join("run_a"), dir.path().join("run_b"));
    run_pipeline(&config, &a, "1")?;
    run_pipeline(&config, &b, "3")?;
    let files = files_under(&a);
    ensure!(files == files_under(&b), "the two runs wrote different file sets");
    for must in ["dataset/train.vwin", "model/pretrained.vckpt", "model/finetuned.vckpt", "reports/pretrained/metrics.json"] {
        ensure!(files.iter().any(|f| f == Path::new(must)), "missing output {must}");
    }
    for f in &files {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        ensure!(x == y, "{} differs between runs", f.display());
    }
    Ok(format!(
        "synth → preprocess → train → finetune → eval → report twice (1 and 3 threads): {} files byte-identical",
        files.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient oracle", criterion_1),
        ("finite-difference acceleration exactness", criterion_2),
        ("kinematics identity and FK oracle", criterion_3),
        ("windowing formula", criterion_4),
        ("metric oracles", criterion_5),
        ("synthetic learnability", criterion_6),
        ("transfer protocol", criterion_7),
        ("CLI determinism", criterion_8),
    ];
    // `cargo test <filter>` forwards the filter; run matching criteria only
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {id} ({name}): {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} ({name}): {why} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
