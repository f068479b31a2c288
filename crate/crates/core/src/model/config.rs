use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative expressed through the activation output `y = φ(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// How class scores enter the supervised squared error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutputSquash {
    /// `‖Z − softmax(s)‖²`.
    #[default]
    Softmax,
    /// `‖Z − s‖²` on the raw scores.
    Linear,
}

/// One strided 1-D convolution along time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvSpec {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Zero padding on both ends of the time axis.
    pub padding: usize,
    pub activation: Activation,
}

impl ConvSpec {
    /// Padding `(kernel − 1) / 2`.
    pub fn same(channels: usize, kernel: usize, stride: usize, activation: Activation) -> Self {
        Self {
            channels,
            kernel,
            stride,
            padding: (kernel - 1) / 2,
            activation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseSpec {
    pub width: usize,
    pub activation: Activation,
}

/// Architecture: `U` conv layers, `S` fully-connected layers (the last one
/// of width `num_classes`) and `U` transposed convs mirroring the encoder.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkConfig {
    pub input_frames: usize,
    pub input_dims: usize,
    pub num_classes: usize,
    pub encoder: Vec<ConvSpec>,
    pub classifier: Vec<DenseSpec>,
    /// Activation of each decoder layer, first (deepest) to last.
    pub decoder_activations: Vec<Activation>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub output: OutputSquash,
    /// Weight of the reconstruction penalty.
    pub lambda: f64,
}

/// Lengths and channels implied by a [`NetworkConfig`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geometry {
    /// `lengths[0]` is the input length, `lengths[l]` the output of conv `l`.
    pub lengths: Vec<usize>,
    /// `channels[0]` is the input dimension count.
    pub channels: Vec<usize>,
    /// Extra length the transposed conv mirroring encoder layer `l` appends.
    pub output_padding: Vec<usize>,
    /// Input widths of the dense layers; `dense_inputs[0]` is the latent size.
    pub dense_inputs: Vec<usize>,
}

impl Geometry {
    pub fn latent_channels(&self) -> usize {
        *self.channels.last().unwrap()
    }

    pub fn latent_len(&self) -> usize {
        *self.lengths.last().unwrap()
    }

    pub fn latent_size(&self) -> usize {
        self.latent_channels() * self.latent_len()
    }

    pub fn input_size(&self) -> usize {
        self.channels[0] * self.lengths[0]
    }
}

impl NetworkConfig {
    /// Three stride-2 convs (32/64/128 channels, kernel 5), a 128-wide
    /// hidden layer and linear class scores.
    pub fn default_for(input_frames: usize, input_dims: usize, num_classes: usize, lambda: f64) -> Self {
        Self {
            input_frames,
            input_dims,
            num_classes,
            encoder: vec![
                ConvSpec::same(32, 5, 2, Activation::Relu),
                ConvSpec::same(64, 5, 2, Activation::Relu),
                ConvSpec::same(128, 5, 2, Activation::Relu),
            ],
            classifier: vec![
                DenseSpec {
                    width: 128,
                    activation: Activation::Relu,
                },
                DenseSpec {
                    width: num_classes,
                    activation: Activation::Identity,
                },
            ],
            decoder_activations: vec![Activation::Relu, Activation::Relu, Activation::Identity],
            output: OutputSquash::Softmax,
            lambda,
        }
    }

    pub fn conv_layers(&self) -> usize {
        self.encoder.len()
    }

    pub fn dense_layers(&self) -> usize {
        self.classifier.len()
    }

    /// Validates the config and derives layer sizes. Every problem that
    /// would prevent the decoder from reproducing the input shape surfaces
    /// here, before any parameters exist.
    pub fn geometry(&self) -> Result<Geometry> {
        if self.input_frames == 0 || self.input_dims == 0 {
            return Err(Error::config(format!(
                "input shape must be non-empty, got {}×{}",
                self.input_frames, self.input_dims
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::config("num_classes must be at least 1"));
        }
        if self.encoder.is_empty() {
            return Err(Error::config("need at least one conv layer (U ≥ 1)"));
        }
        if self.classifier.is_empty() {
            return Err(Error::config("need at least one fully-connected layer (S ≥ 1)"));
        }
        if self.decoder_activations.len() != self.encoder.len() {
            return Err(Error::config(format!(
                "decoder has {} activations but the encoder has {} layers",
                self.decoder_activations.len(),
                self.encoder.len()
            )));
        }
        let last = self.classifier.last().unwrap();
        if last.width != self.num_classes {
            return Err(Error::config(format!(
                "last fully-connected layer has width {} but there are {} classes",
                last.width, self.num_classes
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }

        let mut lengths = vec![self.input_frames];
        let mut channels = vec![self.input_dims];
        let mut output_padding = Vec::with_capacity(self.encoder.len());
        for (l, spec) in self.encoder.iter().enumerate() {
            if spec.channels == 0 || spec.kernel == 0 || spec.stride == 0 {
                return Err(Error::config(format!(
                    "conv layer {}: channels, kernel and stride must be positive",
                    l + 1
                )));
            }
            if spec.padding >= spec.kernel {
                return Err(Error::config(format!(
                    "conv layer {}: padding {} must be smaller than kernel {}",
                    l + 1,
                    spec.padding,
                    spec.kernel
                )));
            }
            let len_in = *lengths.last().unwrap();
            let padded = len_in + 2 * spec.padding;
            if padded < spec.kernel {
                return Err(Error::config(format!(
                    "conv layer {}: kernel {} longer than padded input {padded}",
                    l + 1,
                    spec.kernel
                )));
            }
            let span = padded - spec.kernel;
            lengths.push(span / spec.stride + 1);
            output_padding.push(span % spec.stride);
            channels.push(spec.channels);
        }

        let mut dense_inputs = vec![channels.last().unwrap() * lengths.last().unwrap()];
        for (l, spec) in self.classifier.iter().enumerate() {
            if spec.width == 0 {
                return Err(Error::config(format!("dense layer {} has zero width", l + 1)));
            }
            dense_inputs.push(spec.width);
        }
        dense_inputs.pop();

        Ok(Geometry {
            lengths,
            channels,
            output_padding,
            dense_inputs,
        })
    }
}

/// Optimizer and schedule.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Train only the fully-connected layers.
    #[cfg_attr(feature = "serde", serde(default))]
    pub freeze_encoder: bool,
    /// Replaces the network's `lambda` when set.
    #[cfg_attr(feature = "serde", serde(default))]
    pub lambda: Option<f64>,
}

pub const DEFAULT_FINE_TUNE_EPOCHS: usize = 20;

impl TrainConfig {
    /// SGD, momentum 0.9, learning rate 1e-2, batch 64.
    pub fn with_seed(seed: u64, epochs: usize) -> Self {
        Self {
            batch_size: 64,
            epochs,
            learning_rate: 1e-2,
            momentum: 0.9,
            seed,
            freeze_encoder: false,
            lambda: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::validation(format!(
                    "lambda must be finite and non-negative, got {l}"
                )));
            }
        }
        Ok(())
    }
}
