//! From-scratch 1-D convolutional network trained on a supervised squared
//! error plus a λ-weighted reconstruction penalty, with manual
//! backpropagation and classifier-only fine-tuning.
//!
//! Computation runs in `f64`; checkpoints store `f32`.

pub mod config;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use config::{
    Activation, ConvSpec, DenseSpec, Geometry, NetworkConfig, OutputSquash, TrainConfig,
    DEFAULT_FINE_TUNE_EPOCHS,
};
pub use network::{
    argmax_lowest, GradMask, LayerParams, LossBreakdown, NamedTensor, Network, NetworkParams,
    ParamGroup, Prediction,
};
pub use tensor::Tensor;
pub use train::{
    evaluate, fine_tune, predict_all, train, train_from, EpochRecord, Evaluation, Executor, Serial,
    TrainOutcome,
};
