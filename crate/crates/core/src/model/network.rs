//! The joint supervised + reconstruction network.
//!
//! Parameters are numbered `W_1 … W_{2U+S}`: encoder convs first, then the
//! fully-connected classifier, then the decoder's transposed convs. Encoder
//! and decoder never share weights.
//!
//! For a batch of `B` windows the objective is
//!
//! ```text
//! L0 = Σ (Z − q(s))² / (B·CN)        q = softmax or identity
//! L1 = Σ (X − X̂)² / (B·T·D)
//! total = L0 + λ·L1
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Activation, Geometry, NetworkConfig, OutputSquash};
use super::layers::{self, ConvDims};
use super::tensor::Tensor;
use super::train::{tree_reduce, Executor, Serial};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// All trainable tensors, grouped by role. Also used for gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// `W_1 … W_U`, weights `[c_out][c_in][kernel]`.
    pub encoder: Vec<LayerParams>,
    /// `W_{U+1} … W_{U+S}`, weights `[out][in]`.
    pub classifier: Vec<LayerParams>,
    /// `W_{U+S+1} … W_{2U+S}`, weights `[c_in][c_out][kernel]`.
    pub decoder: Vec<LayerParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParamGroup {
    Encoder,
    Classifier,
    Decoder,
}

/// Which groups receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradMask {
    pub encoder: bool,
    pub classifier: bool,
    pub decoder: bool,
}

impl GradMask {
    pub const ALL: GradMask = GradMask {
        encoder: true,
        classifier: true,
        decoder: true,
    };
    pub const CLASSIFIER_ONLY: GradMask = GradMask {
        encoder: false,
        classifier: true,
        decoder: false,
    };

    pub fn includes(&self, group: ParamGroup) -> bool {
        match group {
            ParamGroup::Encoder => self.encoder,
            ParamGroup::Classifier => self.classifier,
            ParamGroup::Decoder => self.decoder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub supervised: f64,
    pub reconstruction: f64,
    pub lambda: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub scores: Vec<f64>,
}

/// A named parameter tensor, `W{k}.weight` or `W{k}.bias`.
pub struct NamedTensor<'a> {
    pub name: String,
    pub group: ParamGroup,
    pub tensor: &'a Tensor,
}

impl LayerParams {
    fn zeros(weight_shape: Vec<usize>, bias_len: usize) -> Self {
        Self {
            weight: Tensor::zeros(weight_shape),
            bias: Tensor::zeros(vec![bias_len]),
        }
    }
}

impl NetworkParams {
    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        let g = config.geometry()?;
        Ok(Self::zeros_for(config, &g))
    }

    fn zeros_for(config: &NetworkConfig, g: &Geometry) -> Self {
        let u = config.encoder.len();
        let encoder = config
            .encoder
            .iter()
            .enumerate()
            .map(|(l, spec)| LayerParams::zeros(vec![g.channels[l + 1], g.channels[l], spec.kernel], g.channels[l + 1]))
            .collect();
        let classifier = config
            .classifier
            .iter()
            .zip(&g.dense_inputs)
            .map(|(spec, n_in)| LayerParams::zeros(vec![spec.width, *n_in], spec.width))
            .collect();
        let decoder = (0..u)
            .map(|i| {
                let mirrored = u - 1 - i;
                LayerParams::zeros(
                    vec![
                        g.channels[mirrored + 1],
                        g.channels[mirrored],
                        config.encoder[mirrored].kernel,
                    ],
                    g.channels[mirrored],
                )
            })
            .collect();
        Self {
            encoder,
            classifier,
            decoder,
        }
    }

    /// Fan-in-scaled uniform weights, zero biases.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self> {
        let g = config.geometry()?;
        let mut params = Self::zeros_for(config, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |t: &mut Tensor, fan_in: usize, act: Activation| {
            let gain = if act == Activation::Relu { 6.0 } else { 3.0 };
            let bound = libm::sqrt(gain / fan_in.max(1) as f64);
            for w in t.data_mut() {
                *w = rng.random_range(-bound..=bound);
            }
        };
        for (layer, spec) in params.encoder.iter_mut().zip(&config.encoder) {
            let fan_in = layer.weight.shape()[1] * spec.kernel;
            fill(&mut layer.weight, fan_in, spec.activation);
        }
        for (layer, spec) in params.classifier.iter_mut().zip(&config.classifier) {
            let fan_in = layer.weight.shape()[1];
            fill(&mut layer.weight, fan_in, spec.activation);
        }
        let u = config.encoder.len();
        for (i, (layer, act)) in params.decoder.iter_mut().zip(&config.decoder_activations).enumerate() {
            let spec = &config.encoder[u - 1 - i];
            let fan_in = layer.weight.shape()[0] * spec.kernel / spec.stride;
            fill(&mut layer.weight, fan_in, *act);
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        let z = |l: &LayerParams| LayerParams {
            weight: Tensor::zeros(l.weight.shape().to_vec()),
            bias: Tensor::zeros(l.bias.shape().to_vec()),
        };
        Self {
            encoder: self.encoder.iter().map(z).collect(),
            classifier: self.classifier.iter().map(z).collect(),
            decoder: self.decoder.iter().map(z).collect(),
        }
    }

    /// Layers with their group and 1-based index `k`.
    pub fn layers(&self) -> impl Iterator<Item = (ParamGroup, usize, &LayerParams)> {
        self.encoder
            .iter()
            .map(|l| (ParamGroup::Encoder, l))
            .chain(self.classifier.iter().map(|l| (ParamGroup::Classifier, l)))
            .chain(self.decoder.iter().map(|l| (ParamGroup::Decoder, l)))
            .enumerate()
            .map(|(i, (g, l))| (g, i + 1, l))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = (ParamGroup, usize, &mut LayerParams)> {
        self.encoder
            .iter_mut()
            .map(|l| (ParamGroup::Encoder, l))
            .chain(self.classifier.iter_mut().map(|l| (ParamGroup::Classifier, l)))
            .chain(self.decoder.iter_mut().map(|l| (ParamGroup::Decoder, l)))
            .enumerate()
            .map(|(i, (g, l))| (g, i + 1, l))
    }

    /// Weight then bias of each layer, in `W_1 … W_{2U+S}` order.
    pub fn named_tensors(&self) -> Vec<NamedTensor<'_>> {
        let mut out = Vec::new();
        for (group, k, layer) in self.layers() {
            out.push(NamedTensor {
                name: format!("W{k}.weight"),
                group,
                tensor: &layer.weight,
            });
            out.push(NamedTensor {
                name: format!("W{k}.bias"),
                group,
                tensor: &layer.bias,
            });
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(ParamGroup, &mut Tensor)> {
        let mut out = Vec::new();
        for (group, _, layer) in self.layers_mut() {
            out.push((group, &mut layer.weight));
            out.push((group, &mut layer.bias));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|(_, _, l)| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(|(_, _, l)| l.weight.is_finite() && l.bias.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &NetworkParams) {
        for ((_, _, a), (_, _, b)) in self.layers_mut().zip(other.layers()) {
            a.weight.add_assign(&b.weight);
            a.bias.add_assign(&b.bias);
        }
    }

    fn same_shapes(&self, other: &NetworkParams) -> Result<()> {
        if self.encoder.len() != other.encoder.len()
            || self.classifier.len() != other.classifier.len()
            || self.decoder.len() != other.decoder.len()
        {
            return Err(Error::shape(
                "layer counts (encoder, classifier, decoder)",
                &[self.encoder.len(), self.classifier.len(), self.decoder.len()],
                &[other.encoder.len(), other.classifier.len(), other.decoder.len()],
            ));
        }
        for ((_, k, a), (_, _, b)) in self.layers().zip(other.layers()) {
            if a.weight.shape() != b.weight.shape() {
                return Err(Error::shape(format!("W{k}.weight"), a.weight.shape(), b.weight.shape()));
            }
            if a.bias.shape() != b.bias.shape() {
                return Err(Error::shape(format!("W{k}.bias"), a.bias.shape(), b.bias.shape()));
            }
        }
        Ok(())
    }
}

/// Forward activations of one sample, channel-major.
pub(crate) struct SampleCache {
    /// `enc[0]` is the input; `enc[l]` the output of conv `l`.
    enc: Vec<Vec<f64>>,
    /// `dense[0]` is the flattened latent; `dense[l]` the output of fc `l`.
    dense: Vec<Vec<f64>>,
    /// `dec[0]` is the latent; `dec[U]` the reconstruction.
    dec: Vec<Vec<f64>>,
}

/// Summed per-sample contributions; combined by tree reduction.
pub(crate) struct Accum {
    pub grads: Option<NetworkParams>,
    pub supervised: f64,
    pub reconstruction: f64,
    pub correct: usize,
}

impl Accum {
    pub(crate) fn merge(mut self, other: Accum) -> Accum {
        match (&mut self.grads, &other.grads) {
            (Some(a), Some(b)) => a.add_assign(b),
            (None, Some(_)) => self.grads = other.grads,
            _ => {}
        }
        self.supervised += other.supervised;
        self.reconstruction += other.reconstruction;
        self.correct += other.correct;
        self
    }
}

/// A configured network with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    geometry: Geometry,
    params: NetworkParams,
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

fn softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|x| libm::exp(x - m)).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

fn time_major_to_channel_major(x: &[f64], frames: usize, dims: usize) -> Vec<f64> {
    let mut out = vec![0.0; frames * dims];
    for t in 0..frames {
        for d in 0..dims {
            out[d * frames + t] = x[t * dims + d];
        }
    }
    out
}

fn channel_major_to_time_major(x: &[f64], frames: usize, dims: usize) -> Vec<f64> {
    let mut out = vec![0.0; frames * dims];
    for d in 0..dims {
        for t in 0..frames {
            out[t * dims + d] = x[d * frames + t];
        }
    }
    out
}

impl Network {
    /// Freshly initialized network.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        let params = NetworkParams::init(&config, seed)?;
        Self::from_params(config, params)
    }

    pub fn from_params(config: NetworkConfig, params: NetworkParams) -> Result<Self> {
        let geometry = config.geometry()?;
        NetworkParams::zeros_for(&config, &geometry).same_shapes(&params)?;
        Ok(Self {
            config,
            geometry,
            params,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetworkParams {
        &mut self.params
    }

    pub fn into_parts(self) -> (NetworkConfig, NetworkParams) {
        (self.config, self.params)
    }

    pub(crate) fn set_lambda(&mut self, lambda: f64) {
        self.config.lambda = lambda;
    }

    fn encoder_dims(&self, l: usize) -> ConvDims {
        let spec = &self.config.encoder[l];
        let g = &self.geometry;
        ConvDims {
            c_in: g.channels[l],
            c_out: g.channels[l + 1],
            kernel: spec.kernel,
            stride: spec.stride,
            padding: spec.padding,
            len_in: g.lengths[l],
            len_out: g.lengths[l + 1],
        }
    }

    /// Decoder layer `i` (0-based) mirrors encoder layer `U − 1 − i`.
    fn decoder_dims(&self, i: usize) -> ConvDims {
        let m = self.config.encoder.len() - 1 - i;
        let e = self.encoder_dims(m);
        ConvDims {
            c_in: e.c_out,
            c_out: e.c_in,
            len_in: e.len_out,
            len_out: e.len_in,
            ..e
        }
    }

    fn input_shape(&self) -> [usize; 2] {
        [self.config.input_frames, self.config.input_dims]
    }

    fn check_batch(&self, x: &Tensor) -> Result<usize> {
        let [t, d] = self.input_shape();
        match x.shape() {
            [b, tt, dd] if *tt == t && *dd == d => Ok(*b),
            other => Err(Error::shape("input batch (batch × frames × dims)", &[0, t, d], other)),
        }
    }

    fn check_labels(&self, labels: &[usize], batch: usize) -> Result<()> {
        if labels.len() != batch {
            return Err(Error::shape("labels", &[batch], &[labels.len()]));
        }
        if let Some(bad) = labels.iter().find(|l| **l >= self.config.num_classes) {
            return Err(Error::validation(format!(
                "label {bad} out of range for {} classes",
                self.config.num_classes
            )));
        }
        Ok(())
    }

    fn encode_sample(&self, x_cm: Vec<f64>) -> Vec<Vec<f64>> {
        let mut enc = vec![x_cm];
        for (l, layer) in self.params.encoder.iter().enumerate() {
            let d = self.encoder_dims(l);
            let mut out = vec![0.0; d.c_out * d.len_out];
            layers::conv1d_forward(&d, layer.weight.data(), layer.bias.data(), &enc[l], &mut out);
            let act = self.config.encoder[l].activation;
            out.iter_mut().for_each(|v| *v = act.apply(*v));
            enc.push(out);
        }
        enc
    }

    fn classify_sample(&self, latent: &[f64]) -> Vec<Vec<f64>> {
        let mut dense = vec![latent.to_vec()];
        for (l, layer) in self.params.classifier.iter().enumerate() {
            let mut out = vec![0.0; self.config.classifier[l].width];
            layers::dense_forward(layer.weight.data(), layer.bias.data(), &dense[l], &mut out);
            let act = self.config.classifier[l].activation;
            out.iter_mut().for_each(|v| *v = act.apply(*v));
            dense.push(out);
        }
        dense
    }

    fn decode_sample(&self, latent: &[f64]) -> Vec<Vec<f64>> {
        let mut dec = vec![latent.to_vec()];
        for (i, layer) in self.params.decoder.iter().enumerate() {
            let d = self.decoder_dims(i);
            let mut out = vec![0.0; d.c_out * d.len_out];
            layers::conv_transpose1d_forward(&d, layer.weight.data(), layer.bias.data(), &dec[i], &mut out);
            let act = self.config.decoder_activations[i];
            out.iter_mut().for_each(|v| *v = act.apply(*v));
            dec.push(out);
        }
        dec
    }

    pub(crate) fn forward_sample(&self, x_tm: &[f64], with_decoder: bool) -> SampleCache {
        let [t, d] = self.input_shape();
        let enc = self.encode_sample(time_major_to_channel_major(x_tm, t, d));
        let latent = enc.last().unwrap();
        let dense = self.classify_sample(latent);
        let dec = if with_decoder {
            self.decode_sample(latent)
        } else {
            Vec::new()
        };
        SampleCache { enc, dense, dec }
    }

    fn squash(&self, scores: &[f64]) -> Vec<f64> {
        match self.config.output {
            OutputSquash::Softmax => softmax(scores),
            OutputSquash::Linear => scores.to_vec(),
        }
    }

    /// Loss sums and, unless `mask` is empty, gradients for one sample.
    /// `l0_scale` and `l1_scale` are the batch normalizers `1/(B·CN)` and
    /// `1/(B·T·D)`.
    pub(crate) fn sample_step(
        &self,
        x_tm: &[f64],
        label: usize,
        lambda: f64,
        l0_scale: f64,
        l1_scale: f64,
        mask: Option<GradMask>,
    ) -> Accum {
        let cache = self.forward_sample(x_tm, true);
        let scores = cache.dense.last().unwrap();
        let q = self.squash(scores);
        let mut supervised = 0.0;
        for (c, qc) in q.iter().enumerate() {
            let z = if c == label { 1.0 } else { 0.0 };
            supervised += (qc - z) * (qc - z);
        }
        let x_cm = &cache.enc[0];
        let recon = cache.dec.last().unwrap();
        let reconstruction: f64 = recon.iter().zip(x_cm).map(|(r, x)| (r - x) * (r - x)).sum();
        let correct = usize::from(argmax_lowest(scores) == label);

        let grads = mask.map(|mask| self.sample_gradients(&cache, &q, label, lambda, l0_scale, l1_scale, mask));
        debug_assert!(grads.as_ref().is_none_or(|g| g.is_finite()));
        Accum {
            grads,
            supervised,
            reconstruction,
            correct,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn sample_gradients(
        &self,
        cache: &SampleCache,
        q: &[f64],
        label: usize,
        lambda: f64,
        l0_scale: f64,
        l1_scale: f64,
        mask: GradMask,
    ) -> NetworkParams {
        let mut grads = self.params.zeros_like();
        let u = self.config.encoder.len();
        let latent_len = self.geometry.latent_size();

        // supervised path
        let g_q: Vec<f64> = q
            .iter()
            .enumerate()
            .map(|(c, qc)| 2.0 * (qc - if c == label { 1.0 } else { 0.0 }) * l0_scale)
            .collect();
        let mut g = match self.config.output {
            OutputSquash::Linear => g_q,
            OutputSquash::Softmax => {
                let dot: f64 = g_q.iter().zip(q).map(|(a, b)| a * b).sum();
                q.iter().zip(&g_q).map(|(qi, gi)| qi * (gi - dot)).collect()
            }
        };
        let need_latent = mask.encoder;
        let mut g_latent = vec![0.0; latent_len];
        for l in (0..self.params.classifier.len()).rev() {
            let act = self.config.classifier[l].activation;
            for (gv, y) in g.iter_mut().zip(&cache.dense[l + 1]) {
                *gv *= act.derivative_from_output(*y);
            }
            let layer = &self.params.classifier[l];
            let input = &cache.dense[l];
            let gl = &mut grads.classifier[l];
            let want_input = l > 0 || need_latent;
            let mut g_in = vec![0.0; if want_input { input.len() } else { 0 }];
            layers::dense_backward(
                layer.weight.data(),
                input,
                &g,
                mask.classifier.then_some(gl.weight.data_mut()),
                mask.classifier.then_some(gl.bias.data_mut()),
                want_input.then_some(g_in.as_mut_slice()),
            );
            if l == 0 {
                if need_latent {
                    g_latent = g_in;
                }
            } else {
                g = g_in;
            }
        }

        // reconstruction path
        if lambda != 0.0 && (mask.decoder || mask.encoder) {
            let recon = cache.dec.last().unwrap();
            let mut g: Vec<f64> = recon
                .iter()
                .zip(&cache.enc[0])
                .map(|(r, x)| lambda * 2.0 * (r - x) * l1_scale)
                .collect();
            for i in (0..u).rev() {
                let act = self.config.decoder_activations[i];
                for (gv, y) in g.iter_mut().zip(&cache.dec[i + 1]) {
                    *gv *= act.derivative_from_output(*y);
                }
                let d = self.decoder_dims(i);
                let layer = &self.params.decoder[i];
                let gl = &mut grads.decoder[i];
                let want_input = i > 0 || mask.encoder;
                let mut g_in = vec![0.0; if want_input { d.c_in * d.len_in } else { 0 }];
                layers::conv_transpose1d_backward(
                    &d,
                    layer.weight.data(),
                    &cache.dec[i],
                    &g,
                    mask.decoder.then_some(gl.weight.data_mut()),
                    mask.decoder.then_some(gl.bias.data_mut()),
                    want_input.then_some(g_in.as_mut_slice()),
                );
                g = g_in;
            }
            if mask.encoder {
                for (a, b) in g_latent.iter_mut().zip(&g) {
                    *a += b;
                }
            }
        }

        // encoder
        if mask.encoder {
            let mut g = g_latent;
            for l in (0..u).rev() {
                let act = self.config.encoder[l].activation;
                for (gv, y) in g.iter_mut().zip(&cache.enc[l + 1]) {
                    *gv *= act.derivative_from_output(*y);
                }
                let d = self.encoder_dims(l);
                let layer = &self.params.encoder[l];
                let gl = &mut grads.encoder[l];
                let mut g_in = vec![0.0; if l > 0 { d.c_in * d.len_in } else { 0 }];
                layers::conv1d_backward(
                    &d,
                    layer.weight.data(),
                    &cache.enc[l],
                    &g,
                    Some(gl.weight.data_mut()),
                    Some(gl.bias.data_mut()),
                    (l > 0).then_some(g_in.as_mut_slice()),
                );
                g = g_in;
            }
        }
        grads
    }

    /// `[B, T, D]` input to `[B, C_U, L_U]` latent.
    pub fn forward_encoder(&self, x: &Tensor) -> Result<Tensor> {
        let b = self.check_batch(x)?;
        let [t, d] = self.input_shape();
        let mut data = Vec::with_capacity(b * self.geometry.latent_size());
        for sample in x.data().chunks_exact(t * d) {
            let enc = self.encode_sample(time_major_to_channel_major(sample, t, d));
            data.extend_from_slice(enc.last().unwrap());
        }
        Tensor::new(
            vec![b, self.geometry.latent_channels(), self.geometry.latent_len()],
            data,
        )
    }

    fn latent_batch(&self, latent: &Tensor) -> Result<usize> {
        let g = &self.geometry;
        match latent.shape() {
            [b, c, l] if *c == g.latent_channels() && *l == g.latent_len() => Ok(*b),
            [b, n] if *n == g.latent_size() => Ok(*b),
            other => Err(Error::shape(
                "latent (batch × channels × length)",
                &[0, g.latent_channels(), g.latent_len()],
                other,
            )),
        }
    }

    /// Latent to `[B, CN]` class scores (before any squashing).
    pub fn forward_classifier(&self, latent: &Tensor) -> Result<Tensor> {
        let b = self.latent_batch(latent)?;
        let n = self.geometry.latent_size();
        let mut data = Vec::with_capacity(b * self.config.num_classes);
        for z in latent.data().chunks_exact(n) {
            data.extend_from_slice(self.classify_sample(z).last().unwrap());
        }
        Tensor::new(vec![b, self.config.num_classes], data)
    }

    /// Latent to `[B, T, D]` reconstruction.
    pub fn forward_decoder(&self, latent: &Tensor) -> Result<Tensor> {
        let b = self.latent_batch(latent)?;
        let n = self.geometry.latent_size();
        let [t, d] = self.input_shape();
        let mut data = Vec::with_capacity(b * t * d);
        for z in latent.data().chunks_exact(n) {
            let dec = self.decode_sample(z);
            data.extend(channel_major_to_time_major(dec.last().unwrap(), t, d));
        }
        Tensor::new(vec![b, t, d], data)
    }

    fn batch_accum<E: Executor>(
        &self,
        x: &Tensor,
        labels: &[usize],
        lambda: f64,
        mask: Option<GradMask>,
        exec: &E,
    ) -> Result<(LossBreakdown, Accum)> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::validation(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        let b = self.check_batch(x)?;
        self.check_labels(labels, b)?;
        if b == 0 {
            return Err(Error::EmptyData("empty batch".into()));
        }
        let [t, d] = self.input_shape();
        let l0_scale = 1.0 / (b * self.config.num_classes) as f64;
        let l1_scale = 1.0 / (b * t * d) as f64;
        let acc = tree_reduce(exec, 0, b, &|i| {
            let sample = &x.data()[i * t * d..(i + 1) * t * d];
            self.sample_step(sample, labels[i], lambda, l0_scale, l1_scale, mask)
        });
        let supervised = acc.supervised * l0_scale;
        let reconstruction = acc.reconstruction * l1_scale;
        Ok((
            LossBreakdown {
                supervised,
                reconstruction,
                lambda,
                total: supervised + lambda * reconstruction,
            },
            acc,
        ))
    }

    /// Joint objective `L0 + λ·L1` on a labeled batch.
    pub fn joint_loss(&self, x: &Tensor, labels: &[usize], lambda: f64) -> Result<LossBreakdown> {
        self.batch_accum(x, labels, lambda, None, &Serial).map(|(l, _)| l)
    }

    /// Loss plus exact gradients for every `W_k`.
    pub fn backward(&self, x: &Tensor, labels: &[usize], lambda: f64) -> Result<(LossBreakdown, NetworkParams)> {
        self.backward_masked(x, labels, lambda, GradMask::ALL, &Serial)
    }

    pub fn backward_masked<E: Executor>(
        &self,
        x: &Tensor,
        labels: &[usize],
        lambda: f64,
        mask: GradMask,
        exec: &E,
    ) -> Result<(LossBreakdown, NetworkParams)> {
        let (loss, acc) = self.batch_accum(x, labels, lambda, Some(mask), exec)?;
        Ok((loss, acc.grads.expect("gradients requested")))
    }

    /// Class of one `T × D` window (row-major) plus its raw scores.
    pub fn predict(&self, window: &[f64]) -> Result<Prediction> {
        let [t, d] = self.input_shape();
        if window.len() != t * d {
            return Err(Error::shape("window (frames × dims)", &[t, d], &[window.len()]));
        }
        let cache = self.forward_sample(window, false);
        let scores = cache.dense.last().unwrap().clone();
        Ok(Prediction {
            label: argmax_lowest(&scores),
            scores,
        })
    }
}
