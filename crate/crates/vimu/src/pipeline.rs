//! The pipeline stages behind each subcommand. Every stage reads and writes
//! files under an output directory and returns human-readable status lines.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vimu_core::dataset::{
    assemble_features, filter_sequences, normalize_apply, normalize_fit, segment_windows, split, upsample_class,
    FilterPolicy, FilterReportRow, LabelMap, LabeledSequence, SplitMode, Window,
};
use vimu_core::evaluation::confusion;
use vimu_core::model::{evaluate, fine_tune, predict_all, train, EpochRecord, TrainOutcome};
use vimu_core::sensor_synth::{add_acceleration_noise, synthesize_sequence_with};
use vimu_core::Shape;

use crate::config::LoadedConfig;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::io::{
    read_body_model, read_checkpoint, read_dataset, read_imu_sequence, read_pose_sequence, write_checkpoint,
    write_dataset, write_imu_sequence, Checkpoint, DatasetMeta, EpochMetrics, SequenceMeta, WindowDataset,
};
use crate::report::{confusion_tsv, heatmap_pgm, summary_text, MetricsReport};

/// Standard locations under the output directory.
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { out: out.into() }
    }

    pub fn imu_dir(&self) -> PathBuf {
        self.out.join("imu")
    }

    pub fn train_data(&self) -> PathBuf {
        self.out.join("dataset").join("train.vwin")
    }

    pub fn test_data(&self) -> PathBuf {
        self.out.join("dataset").join("test.vwin")
    }

    pub fn filter_report(&self) -> PathBuf {
        self.out.join("dataset").join("filter_report.tsv")
    }

    pub fn pretrained(&self) -> PathBuf {
        self.out.join("model").join("pretrained.vckpt")
    }

    pub fn finetuned(&self) -> PathBuf {
        self.out.join("model").join("finetuned.vckpt")
    }

    pub fn report_dir(&self, checkpoint: &Path) -> PathBuf {
        let stem = checkpoint.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
        self.out.join("reports").join(stem)
    }
}

/// Salt separating the validation carve-out stream from the split stream.
const VALIDATION_SALT: u64 = 0x5eed_0f_7a11;

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Files in `dir` with the given extension, sorted by name.
fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

fn required(lc: &LoadedConfig, p: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    p.as_deref()
        .map(|p| lc.resolve(p))
        .ok_or_else(|| Error::Config(format!("`paths.{key}` is not set")))
}

fn or_default(lc: &LoadedConfig, flag: Option<&Path>, configured: &Option<PathBuf>, default: PathBuf) -> PathBuf {
    match (flag, configured) {
        (Some(f), _) => f.to_path_buf(),
        (None, Some(c)) => lc.resolve(c),
        (None, None) => default,
    }
}

pub fn synth(lc: &LoadedConfig, layout: &Layout) -> Result<Vec<String>> {
    let cfg = &lc.config;
    let model = read_body_model(&required(lc, &cfg.paths.body_model, "body_model")?)?;
    let pose_dir = required(lc, &cfg.paths.poses, "poses")?;
    if cfg.sensors.is_empty() {
        return Err(Error::Config("no [[sensors]] placements configured".into()));
    }
    let shape = if cfg.synth.shape.is_empty() {
        Shape::zeros(model.num_shape_coeffs())
    } else {
        Shape {
            beta: cfg.synth.shape.clone(),
        }
    };
    let options = cfg.synth.options();
    let files = list_files(&pose_dir, "vpose")?;
    if files.is_empty() {
        return Err(vimu_core::Error::EmptyData(format!("no .vpose files in {}", pose_dir.display())).into());
    }
    let out_dir = cfg.paths.imu.as_deref().map_or_else(|| layout.imu_dir(), |p| lc.resolve(p));
    let mut lines = Vec::new();
    for (i, path) in files.iter().enumerate() {
        let (poses, mut meta) = read_pose_sequence(path)?;
        let mut imu = synthesize_sequence_with(&poses, &model, &shape, &cfg.sensors, &options)?;
        if cfg.synth.noise_sigma > 0.0 {
            imu = add_acceleration_noise(&imu, cfg.synth.noise_sigma, cfg.seed.wrapping_add(i as u64))?;
        }
        meta.source_tag.get_or_insert_with(|| stem(path));
        let target = out_dir.join(format!("{}.vimu", stem(path)));
        write_imu_sequence(&target, &imu, &meta)?;
        lines.push(format!(
            "{}: {} pose frames -> {} IMU frames",
            file_name(path),
            poses.poses.len(),
            imu.frame_count()
        ));
    }
    Ok(lines)
}

fn load_labeled(path: &Path, labels: &LabelMap) -> Result<LabeledSequence> {
    let (imu, meta): (_, SequenceMeta) = read_imu_sequence(path)?;
    let name = meta
        .label
        .ok_or_else(|| Error::format(path, "sequence has no `label` in its header"))?;
    let label = labels
        .id(&name)
        .ok_or_else(|| Error::Config(format!("{}: label {name:?} is not in the label map", path.display())))?;
    Ok(LabeledSequence {
        imu,
        label,
        subject: meta.subject.unwrap_or(0),
        source_tag: meta.source_tag.unwrap_or_else(|| stem(path)),
    })
}

fn filter_report_tsv(rows: &[FilterReportRow], labels: &LabelMap) -> String {
    let mut s = String::from("index\tsource_tag\tlabel\tdecision\tsensor\tstatistic\tvalue\tmin\tmax\n");
    for r in rows {
        let label = labels.name(r.label).unwrap_or("?");
        let decision = if r.decision.keep { "keep" } else { "drop" };
        write!(s, "{}\t{}\t{label}\t{decision}", r.index, r.source_tag).unwrap();
        match &r.decision.violation {
            Some(v) => writeln!(
                s,
                "\t{}\t{}\t{}\t{}\t{}",
                v.sensor, v.statistic, v.value, v.band.min, v.band.max
            )
            .unwrap(),
            None => s.push_str("\t-\t-\t-\t-\t-\n"),
        }
    }
    s
}

fn class_counts<'a>(labels: impl Iterator<Item = &'a usize>, n: usize) -> Vec<usize> {
    let mut c = vec![0; n];
    for &l in labels {
        c[l] += 1;
    }
    c
}

pub fn preprocess(lc: &LoadedConfig, layout: &Layout) -> Result<Vec<String>> {
    let cfg = &lc.config;
    let ds = &cfg.dataset;
    let labels = cfg.labels.label_map()?;
    let cn = labels.len();
    let imu_dir = cfg.paths.imu.as_deref().map_or_else(|| layout.imu_dir(), |p| lc.resolve(p));
    let files = list_files(&imu_dir, "vimu")?;
    let sequences = files
        .iter()
        .map(|p| load_labeled(p, &labels))
        .collect::<Result<Vec<_>>>()?;
    let mut lines = vec![format!("{} IMU sequences read from {}", sequences.len(), imu_dir.display())];

    let policy = cfg.filter.clone().unwrap_or_else(|| FilterPolicy::open(cn));
    let (mut kept, report) = filter_sequences(sequences, &policy)?;
    write_text(&layout.filter_report(), &filter_report_tsv(&report, &labels))?;
    lines.push(format!("filter: kept {} of {}", kept.len(), report.len()));
    if kept.is_empty() {
        return Err(vimu_core::Error::EmptyData("no sequence survived filtering".into()).into());
    }

    let counts = class_counts(kept.iter().map(|s| &s.label), cn);
    let targets: Vec<usize> = match &ds.upsample_targets {
        Some(t) if t.len() != cn => {
            return Err(Error::Config(format!(
                "dataset.upsample_targets has {} entries for {cn} classes",
                t.len()
            )))
        }
        Some(t) => t.clone(),
        None if ds.balance => vec![counts.iter().copied().max().unwrap_or(0); cn],
        None => counts.clone(),
    };
    for class in 0..cn {
        if targets[class] <= counts[class] {
            continue;
        }
        if counts[class] == 0 {
            lines.push(format!(
                "warning: class {:?} has no sequences; cannot up-sample to {}",
                labels.name(class).unwrap_or("?"),
                targets[class]
            ));
            continue;
        }
        kept = upsample_class(&kept, class, targets[class], cfg.seed.wrapping_add(class as u64))?;
    }
    let after = class_counts(kept.iter().map(|s| &s.label), cn);
    lines.push(format!("sequences per class after up-sampling: {after:?}"));

    let sensor_order: Vec<String> = if cfg.sensors.is_empty() {
        kept[0].imu.sensor_names().into_iter().map(String::from).collect()
    } else {
        cfg.sensors.iter().map(|s| s.name.clone()).collect()
    };
    let mut windows: Vec<Window> = Vec::new();
    for seq in &kept {
        let feats = assemble_features(&seq.imu, &sensor_order)?;
        windows.extend(segment_windows(&feats, ds.window_len, ds.overlap, seq.label, seq.subject));
    }
    if windows.is_empty() {
        return Err(vimu_core::Error::EmptyData(format!(
            "no sequence is long enough for a {}-frame window",
            ds.window_len
        ))
        .into());
    }
    let dims = windows[0].dims;
    let outcome = split(windows, ds.train_fraction, cfg.seed, ds.split)?;
    for w in &outcome.warnings {
        lines.push(format!("warning: {w}"));
    }
    let (mut train_w, mut test_w) = (outcome.train, outcome.test);
    let norm = if ds.normalize {
        let stats = normalize_fit(&train_w)?;
        train_w = normalize_apply(&train_w, &stats)?;
        test_w = normalize_apply(&test_w, &stats)?;
        Some(stats)
    } else {
        None
    };

    let meta = |split: &str| DatasetMeta {
        num_classes: cn,
        labels: labels.names().map(String::from).collect(),
        window_len: ds.window_len,
        overlap: ds.overlap,
        dims,
        sensor_order: sensor_order.clone(),
        norm: norm.clone(),
        seed: cfg.seed,
        split: split.into(),
        provenance: cfg.effective(),
    };
    lines.push(format!(
        "windows: {} train / {} test, {}×{dims}, per class (train) {:?}",
        train_w.len(),
        test_w.len(),
        ds.window_len,
        class_counts(train_w.iter().map(|w| &w.label), cn)
    ));
    write_dataset(
        &layout.train_data(),
        &WindowDataset {
            meta: meta("train"),
            windows: train_w,
        },
    )?;
    write_dataset(
        &layout.test_data(),
        &WindowDataset {
            meta: meta("test"),
            windows: test_w,
        },
    )?;
    Ok(lines)
}

pub fn trace_tsv(trace: &[EpochRecord]) -> String {
    let mut s = String::from("epoch\tL0\tL1\ttotal\ttrain_acc\tval_acc\n");
    for r in trace {
        let val = r.val_accuracy.map_or_else(|| "NA".into(), |v| v.to_string());
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{val}",
            r.epoch, r.supervised, r.reconstruction, r.total, r.train_accuracy
        )
        .unwrap();
    }
    s
}

/// Splits off a stratified validation set; `None` when the fraction is 0.
fn carve_validation(windows: Vec<Window>, fraction: f64, seed: u64) -> Result<(Vec<Window>, Option<Vec<Window>>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("validation fraction must lie in [0, 1), got {fraction}")));
    }
    if fraction == 0.0 || windows.is_empty() {
        return Ok((windows, None));
    }
    let o = split(windows, 1.0 - fraction, seed ^ VALIDATION_SALT, SplitMode::Stratified)?;
    let val = (!o.test.is_empty()).then_some(o.test);
    Ok((o.train, val))
}

fn best_metrics(outcome: &TrainOutcome) -> Option<EpochMetrics> {
    outcome
        .best_epoch
        .and_then(|e| outcome.trace.get(e - 1))
        .map(EpochMetrics::from)
}

fn summarize_training(lines: &mut Vec<String>, outcome: &TrainOutcome) {
    if let Some(last) = outcome.trace.last() {
        lines.push(format!(
            "epoch {}: L0 {:.6} L1 {:.6} total {:.6} train acc {:.4}",
            last.epoch, last.supervised, last.reconstruction, last.total, last.train_accuracy
        ));
    }
    if let Some(m) = best_metrics(outcome) {
        lines.push(format!(
            "kept epoch {} (total {:.6}{})",
            m.epoch,
            m.total,
            m.val_total.map_or_else(String::new, |v| format!(", validation total {v:.6}"))
        ));
    }
}

fn nonempty(ds: &WindowDataset, path: &Path) -> Result<()> {
    if ds.windows.is_empty() {
        return Err(vimu_core::Error::EmptyData(format!("{} holds no windows", path.display())).into());
    }
    Ok(())
}

pub fn train_cmd(lc: &LoadedConfig, layout: &Layout, data: Option<&Path>, exec: Exec) -> Result<Vec<String>> {
    let cfg = &lc.config;
    let path = or_default(lc, data, &cfg.paths.train_data, layout.train_data());
    let ds = read_dataset(&path)?;
    nonempty(&ds, &path)?;
    let m = &ds.meta;
    let net_cfg = cfg.network_config(m.window_len, m.dims, m.num_classes);
    let (fit, val) = carve_validation(ds.windows, cfg.train.validation_fraction, cfg.seed)?;
    let mut lines = vec![format!(
        "training on {} windows ({} validation) from {}",
        fit.len(),
        val.as_ref().map_or(0, Vec::len),
        file_name(&path)
    )];
    let outcome = train(net_cfg, &fit, val.as_deref(), &cfg.train_config(), &exec)?;
    summarize_training(&mut lines, &outcome);
    let target = layout.pretrained();
    write_text(&target.with_file_name("pretrained_trace.tsv"), &trace_tsv(&outcome.trace))?;
    write_checkpoint(
        &target,
        &Checkpoint {
            metrics: best_metrics(&outcome),
            epoch: outcome.best_epoch,
            network: outcome.network,
            seed: cfg.seed,
            labels: m.labels.clone(),
            provenance: cfg.effective(),
        },
    )?;
    lines.push(format!("wrote {}", target.display()));
    Ok(lines)
}

pub fn finetune_cmd(
    lc: &LoadedConfig,
    layout: &Layout,
    checkpoint: Option<&Path>,
    data: Option<&Path>,
    exec: Exec,
) -> Result<Vec<String>> {
    let cfg = &lc.config;
    let ckpt_path = or_default(lc, checkpoint, &cfg.paths.checkpoint, layout.pretrained());
    let data_path = or_default(lc, data, &cfg.paths.finetune_data, layout.train_data());
    let ckpt = read_checkpoint(&ckpt_path)?;
    let ds = read_dataset(&data_path)?;
    nonempty(&ds, &data_path)?;
    let (fit, val) = carve_validation(ds.windows, cfg.finetune_validation_fraction(), cfg.seed)?;
    let mut lines = vec![format!(
        "fine-tuning {} on {} windows from {} (fully-connected layers only)",
        file_name(&ckpt_path),
        fit.len(),
        file_name(&data_path)
    )];
    let outcome = fine_tune(ckpt.network, &fit, val.as_deref(), &cfg.finetune_config(), &exec)?;
    summarize_training(&mut lines, &outcome);
    let target = layout.finetuned();
    write_text(&target.with_file_name("finetuned_trace.tsv"), &trace_tsv(&outcome.trace))?;
    write_checkpoint(
        &target,
        &Checkpoint {
            metrics: best_metrics(&outcome),
            epoch: outcome.best_epoch,
            network: outcome.network,
            seed: cfg.seed,
            labels: ckpt.labels,
            provenance: cfg.effective(),
        },
    )?;
    lines.push(format!("wrote {}", target.display()));
    Ok(lines)
}

pub fn eval_cmd(
    lc: &LoadedConfig,
    layout: &Layout,
    checkpoint: Option<&Path>,
    data: Option<&Path>,
    exec: Exec,
) -> Result<Vec<String>> {
    let cfg = &lc.config;
    let ckpt_path = or_default(lc, checkpoint, &cfg.paths.checkpoint, layout.pretrained());
    let data_path = or_default(lc, data, &cfg.paths.test_data, layout.test_data());
    let ckpt = read_checkpoint(&ckpt_path)?;
    let ds = read_dataset(&data_path)?;
    nonempty(&ds, &data_path)?;
    let net = &ckpt.network;
    let losses = evaluate(net, &ds.windows, &exec)?;
    let preds = predict_all(net, &ds.windows)?;
    let truths: Vec<usize> = ds.windows.iter().map(|w| w.label).collect();
    let cm = confusion(&preds, &truths, net.config().num_classes)?;
    let labels = if ckpt.labels.len() == cm.num_classes() {
        ckpt.labels.clone()
    } else {
        ds.meta.labels.clone()
    };
    let report = MetricsReport::new(&cm, &labels, file_name(&ckpt_path), file_name(&data_path), cfg.effective())?;
    let dir = layout.report_dir(&ckpt_path);
    write_text(&dir.join("metrics.json"), &report.to_json())?;
    write_text(&dir.join("confusion.tsv"), &confusion_tsv(&cm, &labels))?;
    write_bytes(&dir.join("confusion.pgm"), &heatmap_pgm(&cm))?;
    let mut lines = vec![format!(
        "loss: L0 {:.6} L1 {:.6} total {:.6}",
        losses.supervised, losses.reconstruction, losses.total
    )];
    lines.extend(summary_text(&report).lines().map(String::from));
    lines.push(format!("wrote {}", dir.display()));
    Ok(lines)
}

/// Re-renders the summary and heatmap next to an existing metrics report.
pub fn report_cmd(metrics: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(metrics).map_err(|e| Error::io(metrics, e))?;
    let report: MetricsReport =
        serde_json::from_str(&text).map_err(|e| Error::format(metrics, format!("bad metrics report: {e}")))?;
    let cm = report.confusion_matrix()?;
    let dir = metrics.parent().unwrap_or(Path::new("."));
    let summary = summary_text(&report);
    write_text(&dir.join("summary.txt"), &summary)?;
    write_bytes(&dir.join("confusion.pgm"), &heatmap_pgm(&cm))?;
    write_text(&dir.join("confusion.tsv"), &confusion_tsv(&cm, &report.labels()))?;
    Ok(summary.lines().map(String::from).collect())
}
