//! Mini-batch SGD with momentum, FC-only fine-tuning, and the order-fixed
//! gradient reduction shared by serial and parallel execution.
//!
//! Per-sample contributions are always combined by the same balanced binary
//! tree over sample indices, so a parallel [`Executor`] yields bit-identical
//! results to [`Serial`].

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{NetworkConfig, TrainConfig};
use super::network::{Accum, GradMask, Network, NetworkParams};
use crate::dataset::Window;
use crate::error::{Error, Result};

/// Runs two closures, possibly in parallel.
pub trait Executor: Sync {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        (a(), b())
    }
}

/// Pairwise reduction of `leaf(lo..hi)` in index order. `hi > lo`.
pub(crate) fn tree_reduce<E: Executor>(exec: &E, lo: usize, hi: usize, leaf: &(dyn Fn(usize) -> Accum + Sync)) -> Accum {
    debug_assert!(hi > lo);
    if hi - lo == 1 {
        return leaf(lo);
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = exec.join(|| tree_reduce(exec, lo, mid, leaf), || tree_reduce(exec, mid, hi, leaf));
    a.merge(b)
}

/// One line of the epoch trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training losses accumulated over the epoch's mini-batches.
    pub supervised: f64,
    pub reconstruction: f64,
    pub total: f64,
    pub train_accuracy: f64,
    pub val_total: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters of the best epoch (lowest validation loss, or training
    /// loss without a validation set). The initial network when no epoch ran.
    pub network: Network,
    pub trace: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

/// Loss and accuracy of a network on a labeled set, forward pass only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub supervised: f64,
    pub reconstruction: f64,
    pub total: f64,
    pub accuracy: f64,
}

fn check_windows(net: &Network, windows: &[Window], what: &str) -> Result<()> {
    let cfg = net.config();
    for w in windows {
        if w.frames != cfg.input_frames || w.dims != cfg.input_dims {
            return Err(Error::shape(
                format!("{what} window (frames × dims)"),
                &[cfg.input_frames, cfg.input_dims],
                &[w.frames, w.dims],
            ));
        }
        if w.label >= cfg.num_classes {
            return Err(Error::validation(format!(
                "{what} window label {} out of range for {} classes",
                w.label, cfg.num_classes
            )));
        }
    }
    Ok(())
}

fn accumulate<E: Executor>(
    net: &Network,
    windows: &[&Window],
    lambda: f64,
    mask: Option<GradMask>,
    l0_scale: f64,
    l1_scale: f64,
    exec: &E,
) -> Accum {
    tree_reduce(exec, 0, windows.len(), &|i| {
        let w = windows[i];
        net.sample_step(&w.features, w.label, lambda, l0_scale, l1_scale, mask)
    })
}

pub fn evaluate<E: Executor>(net: &Network, windows: &[Window], exec: &E) -> Result<Evaluation> {
    if windows.is_empty() {
        return Err(Error::EmptyData("evaluation set is empty".into()));
    }
    check_windows(net, windows, "evaluation")?;
    let cfg = net.config();
    let n = windows.len();
    let l0_scale = 1.0 / (n * cfg.num_classes) as f64;
    let l1_scale = 1.0 / (n * cfg.input_frames * cfg.input_dims) as f64;
    let refs: Vec<&Window> = windows.iter().collect();
    let acc = accumulate(net, &refs, cfg.lambda, None, l0_scale, l1_scale, exec);
    let supervised = acc.supervised * l0_scale;
    let reconstruction = acc.reconstruction * l1_scale;
    Ok(Evaluation {
        supervised,
        reconstruction,
        total: supervised + cfg.lambda * reconstruction,
        accuracy: acc.correct as f64 / n as f64,
    })
}

/// Initializes a network from `train_cfg.seed` and trains it.
pub fn train<E: Executor>(
    config: NetworkConfig,
    train_set: &[Window],
    validation: Option<&[Window]>,
    train_cfg: &TrainConfig,
    exec: &E,
) -> Result<TrainOutcome> {
    let net = Network::new(config, train_cfg.seed)?;
    train_from(net, train_set, validation, train_cfg, exec)
}

/// Trains only the fully-connected layers; encoder and decoder tensors are
/// left bit-identical.
pub fn fine_tune<E: Executor>(
    net: Network,
    target_set: &[Window],
    validation: Option<&[Window]>,
    train_cfg: &TrainConfig,
    exec: &E,
) -> Result<TrainOutcome> {
    let mut cfg = train_cfg.clone();
    cfg.freeze_encoder = true;
    train_from(net, target_set, validation, &cfg, exec)
}

pub fn train_from<E: Executor>(
    mut net: Network,
    train_set: &[Window],
    validation: Option<&[Window]>,
    train_cfg: &TrainConfig,
    exec: &E,
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyData("training set is empty".into()));
    }
    check_windows(&net, train_set, "training")?;
    if let Some(v) = validation {
        check_windows(&net, v, "validation")?;
    }
    if let Some(lambda) = train_cfg.lambda {
        net.set_lambda(lambda);
    }
    let lambda = net.config().lambda;
    let mask = if train_cfg.freeze_encoder {
        GradMask::CLASSIFIER_ONLY
    } else {
        GradMask::ALL
    };
    let validation = validation.filter(|v| !v.is_empty());

    let cfg = net.config().clone();
    let n = train_set.len();
    let per_sample = (cfg.input_frames * cfg.input_dims) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut velocity = net.params().zeros_like();
    let mut trace = Vec::with_capacity(train_cfg.epochs);
    let mut best: Option<(f64, usize, NetworkParams)> = None;

    for epoch in 1..=train_cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sup, mut rec, mut correct) = (0.0, 0.0, 0usize);
        for batch in order.chunks(train_cfg.batch_size) {
            let windows: Vec<&Window> = batch.iter().map(|&i| &train_set[i]).collect();
            let b = windows.len() as f64;
            let l0_scale = 1.0 / (b * cfg.num_classes as f64);
            let l1_scale = 1.0 / (b * per_sample);
            let acc = accumulate(&net, &windows, lambda, Some(mask), l0_scale, l1_scale, exec);
            let batch_total = acc.supervised * l0_scale + lambda * acc.reconstruction * l1_scale;
            if !batch_total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    learning_rate: train_cfg.learning_rate,
                });
            }
            sup += acc.supervised;
            rec += acc.reconstruction;
            correct += acc.correct;
            let grads = acc.grads.expect("gradients requested");
            sgd_momentum_step(net.params_mut(), &mut velocity, &grads, train_cfg, mask);
        }
        if !net.params().is_finite() {
            return Err(Error::Diverged {
                epoch,
                learning_rate: train_cfg.learning_rate,
            });
        }
        let supervised = sup / (n * cfg.num_classes) as f64;
        let reconstruction = rec / (n as f64 * per_sample);
        let total = supervised + lambda * reconstruction;
        let val = validation.map(|v| evaluate(&net, v, exec)).transpose()?;
        trace.push(EpochRecord {
            epoch,
            supervised,
            reconstruction,
            total,
            train_accuracy: correct as f64 / n as f64,
            val_total: val.map(|v| v.total),
            val_accuracy: val.map(|v| v.accuracy),
        });
        let score = val.map_or(total, |v| v.total);
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, epoch, net.params().clone()));
        }
    }

    let best_epoch = best.as_ref().map(|(_, e, _)| *e);
    if let Some((_, _, params)) = best {
        *net.params_mut() = params;
    }
    Ok(TrainOutcome {
        network: net,
        trace,
        best_epoch,
    })
}

fn sgd_momentum_step(
    params: &mut NetworkParams,
    velocity: &mut NetworkParams,
    grads: &NetworkParams,
    cfg: &TrainConfig,
    mask: GradMask,
) {
    let mut vel = velocity.tensors_mut();
    let grad_tensors = grads.named_tensors();
    for ((group, w), ((_, v), g)) in params.tensors_mut().into_iter().zip(vel.iter_mut().zip(&grad_tensors)) {
        if !mask.includes(group) {
            continue;
        }
        for ((wi, vi), gi) in w.data_mut().iter_mut().zip(v.data_mut()).zip(g.tensor.data()) {
            *vi = cfg.momentum * *vi - cfg.learning_rate * gi;
            *wi += *vi;
        }
    }
}

/// Predicted labels for every window.
pub fn predict_all(net: &Network, windows: &[Window]) -> Result<Vec<usize>> {
    windows
        .iter()
        .map(|w| net.predict(&w.features).map(|p| p.label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::model::config::{Activation, ConvSpec, DenseSpec, OutputSquash};

    pub(crate) fn tiny_config(frames: usize, dims: usize, classes: usize) -> NetworkConfig {
        NetworkConfig {
            input_frames: frames,
            input_dims: dims,
            num_classes: classes,
            encoder: vec![ConvSpec::same(4, 3, 2, Activation::Relu)],
            classifier: vec![DenseSpec {
                width: classes,
                activation: Activation::Identity,
            }],
            decoder_activations: vec![Activation::Identity],
            output: OutputSquash::Softmax,
            lambda: 0.1,
        }
    }

    fn windows(n: usize, frames: usize, dims: usize, classes: usize) -> Vec<Window> {
        (0..n)
            .map(|i| {
                let label = i % classes;
                Window {
                    frames,
                    dims,
                    features: (0..frames * dims)
                        .map(|j| if j % dims == label { 1.0 } else { 0.0 } + 0.01 * ((i * 7 + j) as f64).sin())
                        .collect(),
                    label,
                    subject: 0,
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let data = windows(12, 8, 3, 3);
        let mut cfg = TrainConfig::with_seed(5, 4);
        cfg.learning_rate = 0.0;
        cfg.batch_size = 5;
        let init = Network::new(tiny_config(8, 3, 3), 5).unwrap();
        let out = train(tiny_config(8, 3, 3), &data, None, &cfg, &Serial).unwrap();
        assert_eq!(out.network.params(), init.params());
        assert_eq!(out.trace.len(), 4);
    }

    #[test]
    fn same_seed_same_trace() {
        let data = windows(30, 8, 3, 3);
        let mut cfg = TrainConfig::with_seed(9, 5);
        cfg.batch_size = 4;
        let a = train(tiny_config(8, 3, 3), &data, Some(&data[..6]), &cfg, &Serial).unwrap();
        let b = train(tiny_config(8, 3, 3), &data, Some(&data[..6]), &cfg, &Serial).unwrap();
        assert_eq!(a, b);
        cfg.seed = 10;
        let c = train(tiny_config(8, 3, 3), &data, Some(&data[..6]), &cfg, &Serial).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn fine_tune_touches_only_classifier() {
        let data = windows(20, 8, 3, 3);
        let net = Network::new(tiny_config(8, 3, 3), 1).unwrap();
        let mut cfg = TrainConfig::with_seed(2, 3);
        cfg.batch_size = 6;
        let out = fine_tune(net.clone(), &data, None, &cfg, &Serial).unwrap();
        assert_eq!(out.network.params().encoder, net.params().encoder);
        assert_eq!(out.network.params().decoder, net.params().decoder);
        assert_ne!(out.network.params().classifier, net.params().classifier);

        cfg.epochs = 0;
        let out = fine_tune(net.clone(), &data, None, &cfg, &Serial).unwrap();
        assert_eq!(out.network, net);
        assert_eq!(out.best_epoch, None);
    }

    #[test]
    fn fine_tune_rejects_other_feature_dims() {
        let net = Network::new(tiny_config(8, 3, 3), 1).unwrap();
        let other = windows(6, 8, 4, 3);
        let err = fine_tune(net, &other, None, &TrainConfig::with_seed(1, 1), &Serial).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn divergence_is_reported() {
        let data = windows(12, 8, 3, 3);
        let mut cfg = TrainConfig::with_seed(3, 50);
        cfg.learning_rate = 1e30;
        cfg.momentum = 0.0;
        let mut net_cfg = tiny_config(8, 3, 3);
        net_cfg.output = OutputSquash::Linear;
        let err = train(net_cfg, &data, None, &cfg, &Serial).unwrap_err();
        assert!(matches!(err, Error::Diverged { learning_rate, .. } if learning_rate == 1e30));
    }

    #[test]
    fn tree_reduce_covers_each_leaf_once() {
        let acc = tree_reduce(&Serial, 0, 13, &|i| Accum {
            grads: None,
            supervised: i as f64,
            reconstruction: 1.0,
            correct: 1,
        });
        assert_eq!(acc.supervised, 78.0);
        assert_eq!(acc.correct, 13);
    }
}
