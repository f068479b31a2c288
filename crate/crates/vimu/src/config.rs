//! `PipelineConfig`: one TOML file drives every subcommand. Flags and
//! `--set key=value` overrides are applied to the parsed TOML tree before
//! it is interpreted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vimu_core::dataset::{FilterPolicy, LabelMap, SplitMode, DEFAULT_OVERLAP, DEFAULT_TRAIN_FRACTION, DEFAULT_WINDOW_LEN};
use vimu_core::model::{
    Activation, ConvSpec, DenseSpec, NetworkConfig, OutputSquash, TrainConfig, DEFAULT_FINE_TUNE_EPOCHS,
};
use vimu_core::sensor_synth::{AccelFrame, SynthOptions};
use vimu_core::{RotationCheck, SensorPlacement};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Weight of the reconstruction penalty.
    pub lambda: f64,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub sensors: Vec<SensorPlacement>,
    #[serde(default)]
    pub labels: LabelSpec,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub filter: Option<FilterPolicy>,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub finetune: FinetuneSection,
}

/// Inputs. Relative paths are resolved against the config file's directory;
/// unset ones default to the standard locations under `--out`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub body_model: Option<PathBuf>,
    /// Directory of `.vpose` files.
    pub poses: Option<PathBuf>,
    /// Directory of `.vimu` files.
    pub imu: Option<PathBuf>,
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub finetune_data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Either a preset name (`real_5`, `mocap_12`) or explicit class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelSpec {
    Preset(String),
    Names(Vec<String>),
}

impl Default for LabelSpec {
    fn default() -> Self {
        LabelSpec::Preset("real_5".into())
    }
}

impl LabelSpec {
    pub fn label_map(&self) -> Result<LabelMap> {
        match self {
            LabelSpec::Preset(p) if p == "real_5" => Ok(LabelMap::preset_real_5()),
            LabelSpec::Preset(p) if p == "mocap_12" => Ok(LabelMap::preset_mocap_12()),
            LabelSpec::Preset(p) => Err(Error::Config(format!(
                "unknown label preset {p:?} (expected \"real_5\", \"mocap_12\" or a list of names)"
            ))),
            LabelSpec::Names(n) => Ok(LabelMap::from_names(n)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub accel_frame: AccelFrame,
    /// Report `a − g` for this gravity vector.
    pub gravity: Option<[f64; 3]>,
    /// Standard deviation of additive acceleration noise.
    pub noise_sigma: f64,
    /// Project slightly non-orthonormal input rotations instead of rejecting them.
    pub reorthonormalize: bool,
    /// Shape coefficients; empty means the mean shape.
    pub shape: Vec<f64>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            accel_frame: AccelFrame::Global,
            gravity: None,
            noise_sigma: 0.0,
            reorthonormalize: false,
            shape: Vec::new(),
        }
    }
}

impl SynthSection {
    pub fn options(&self) -> SynthOptions {
        SynthOptions {
            accel_frame: self.accel_frame,
            gravity: self.gravity.map(|g| nalgebra::Vector3::new(g[0], g[1], g[2])),
            rotation_check: if self.reorthonormalize {
                RotationCheck::Reorthonormalize
            } else {
                RotationCheck::Strict
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub window_len: usize,
    pub overlap: f64,
    pub train_fraction: f64,
    pub split: SplitMode,
    pub normalize: bool,
    /// Per-class sequence counts to up-sample to, indexed by label id.
    pub upsample_targets: Option<Vec<usize>>,
    /// Up-sample every class to the largest class (ignored when targets are set).
    pub balance: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW_LEN,
            overlap: DEFAULT_OVERLAP,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            split: SplitMode::Stratified,
            normalize: true,
            upsample_targets: None,
            balance: false,
        }
    }
}

/// Architecture overrides; the class-score layer is always appended.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub encoder: Option<Vec<ConvSpec>>,
    /// Hidden fully-connected layers before the class scores.
    pub hidden: Option<Vec<DenseSpec>>,
    pub decoder_activations: Option<Vec<Activation>>,
    pub output: OutputSquash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Share of the training file held out (stratified) for model selection.
    pub validation_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::with_seed(0, 50);
        Self {
            batch_size: t.batch_size,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            validation_fraction: 0.1,
        }
    }
}

/// Fine-tuning schedule; unset values fall back to `[train]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneSection {
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub validation_fraction: Option<f64>,
}

impl Default for FinetuneSection {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_FINE_TUNE_EPOCHS,
            batch_size: None,
            learning_rate: None,
            momentum: None,
            validation_fraction: None,
        }
    }
}

impl PipelineConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            seed: self.seed,
            freeze_encoder: false,
            lambda: None,
        }
    }

    pub fn finetune_config(&self) -> TrainConfig {
        let f = &self.finetune;
        TrainConfig {
            batch_size: f.batch_size.unwrap_or(self.train.batch_size),
            epochs: f.epochs,
            learning_rate: f.learning_rate.unwrap_or(self.train.learning_rate),
            momentum: f.momentum.unwrap_or(self.train.momentum),
            seed: self.seed,
            freeze_encoder: true,
            lambda: Some(self.lambda),
        }
    }

    pub fn finetune_validation_fraction(&self) -> f64 {
        self.finetune
            .validation_fraction
            .unwrap_or(self.train.validation_fraction)
    }

    pub fn network_config(&self, frames: usize, dims: usize, num_classes: usize) -> NetworkConfig {
        let mut net = NetworkConfig::default_for(frames, dims, num_classes, self.lambda);
        let n = &self.network;
        if let Some(enc) = &n.encoder {
            net.encoder = enc.clone();
            net.decoder_activations = default_decoder_activations(enc.len());
        }
        if let Some(hidden) = &n.hidden {
            net.classifier = hidden.clone();
            net.classifier.push(DenseSpec {
                width: num_classes,
                activation: Activation::Identity,
            });
        }
        if let Some(acts) = &n.decoder_activations {
            net.decoder_activations = acts.clone();
        }
        net.output = n.output;
        net
    }

    /// The config as echoed into output headers.
    pub fn effective(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn default_decoder_activations(u: usize) -> Vec<Activation> {
    (0..u)
        .map(|i| if i + 1 == u { Activation::Identity } else { Activation::Relu })
        .collect()
}

/// A config file plus the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override {s:?} is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Usage(format!("bad override key {key:?}")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {part:?} is not a table")))?;
    }
    unreachable!("keys are non-empty")
}

/// Parses config text. `seed` and `lambda` must appear in the text itself;
/// overrides may change them but never supply a missing one.
pub fn parse_config(text: &str, overrides: &[(String, toml::Value)]) -> Result<PipelineConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for key in ["seed", "lambda"] {
        if !table.contains_key(key) {
            return Err(Error::Config(format!("`{key}` must be set explicitly in the config file")));
        }
    }
    for (k, v) in overrides {
        apply_override(&mut table, k, v.clone())?;
    }
    let cfg: PipelineConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be finite and non-negative, got {}", cfg.lambda)));
    }
    Ok(cfg)
}

pub fn load(path: &Path, overrides: &[(String, toml::Value)]) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config = parse_config(&text, overrides)?;
    let base_dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    Ok(LoadedConfig { config, base_dir })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "seed = 7\nlambda = 0.1\n";

    #[test]
    fn defaults_follow_the_dataset_conventions() {
        let c = parse_config(MINIMAL, &[]).unwrap();
        assert_eq!(c.dataset.window_len, 60);
        assert_eq!(c.dataset.overlap, 0.5);
        assert_eq!(c.dataset.train_fraction, 0.7);
        assert_eq!(c.finetune.epochs, 20);
        assert_eq!(c.labels.label_map().unwrap().len(), 5);
    }

    #[test]
    fn seed_and_lambda_are_mandatory() {
        assert!(matches!(parse_config("lambda = 0.1", &[]), Err(Error::Config(_))));
        assert!(matches!(parse_config("seed = 1", &[]), Err(Error::Config(_))));
        let over = vec![parse_override("lambda=0.5").unwrap()];
        assert!(parse_config("seed = 1", &over).is_err());
    }

    #[test]
    fn overrides_win() {
        let over = vec![
            parse_override("dataset.window_len=30").unwrap(),
            parse_override("seed = 99").unwrap(),
            parse_override("labels=[\"a\", \"b\"]").unwrap(),
            parse_override("synth.accel_frame=sensor").unwrap(),
        ];
        let c = parse_config(MINIMAL, &over).unwrap();
        assert_eq!(c.dataset.window_len, 30);
        assert_eq!(c.seed, 99);
        assert_eq!(c.labels, LabelSpec::Names(vec!["a".into(), "b".into()]));
        assert_eq!(c.synth.accel_frame, AccelFrame::Sensor);
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("seed = 1\nlambda = 0.0\nwindow = 3\n", &[]).is_err());
    }

    #[test]
    fn network_section_appends_class_layer() {
        let text = r#"
seed = 1
lambda = 0.5
[network]
encoder = [{ channels = 4, kernel = 3, stride = 2, padding = 1, activation = "relu" }]
hidden = [{ width = 8, activation = "tanh" }]
"#;
        let c = parse_config(text, &[]).unwrap();
        let net = c.network_config(20, 6, 3);
        assert_eq!(net.classifier.len(), 2);
        assert_eq!(net.classifier[1].width, 3);
        assert_eq!(net.decoder_activations, vec![Activation::Identity]);
        assert_eq!(net.lambda, 0.5);
        net.geometry().unwrap();
    }
}
