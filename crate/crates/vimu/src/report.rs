//! Metrics report (JSON), confusion table (TSV), confusion heatmap (PGM)
//! and the plain-text summary.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vimu_core::evaluation::{accuracy, f1_micro, ConfusionMatrix};

use crate::error::Result;

pub const METRICS_FORMAT: &str = "vimu-metrics";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub id: usize,
    pub name: String,
    /// `null` when the class was never predicted.
    pub precision: Option<f64>,
    /// `null` when the class never occurs.
    pub recall: Option<f64>,
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    pub version: u32,
    /// File names only, so reports do not depend on the output directory.
    pub checkpoint: String,
    pub dataset: String,
    pub total: u64,
    /// TN-inclusive one-vs-rest accuracy, `(ΣTP+ΣTN)/(ΣTP+ΣTN+ΣFP+ΣFN)`.
    pub accuracy_one_vs_rest: f64,
    /// `trace / total`.
    pub accuracy_plain: f64,
    pub f1_micro: f64,
    pub classes: Vec<ClassReport>,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<u64>>,
    pub provenance: Value,
}

impl MetricsReport {
    pub fn new(
        cm: &ConfusionMatrix,
        labels: &[String],
        checkpoint: String,
        dataset: String,
        provenance: Value,
    ) -> Result<Self> {
        let acc = accuracy(cm)?;
        let n = cm.num_classes();
        let classes = (0..n)
            .map(|c| {
                let o = cm.one_vs_rest(c);
                let m = cm.class_metrics(c);
                ClassReport {
                    id: c,
                    name: labels.get(c).cloned().unwrap_or_else(|| c.to_string()),
                    precision: m.precision,
                    recall: m.recall,
                    support: m.support,
                    tp: o.tp,
                    fp: o.fp,
                    fn_: o.fn_,
                    tn: o.tn,
                }
            })
            .collect();
        Ok(Self {
            format: METRICS_FORMAT.into(),
            version: 1,
            checkpoint,
            dataset,
            total: cm.total(),
            accuracy_one_vs_rest: acc.one_vs_rest,
            accuracy_plain: acc.plain,
            f1_micro: f1_micro(cm)?,
            classes,
            confusion: (0..n).map(|t| cm.row(t).to_vec()).collect(),
            provenance,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn confusion_matrix(&self) -> Result<ConfusionMatrix> {
        let n = self.confusion.len();
        Ok(ConfusionMatrix::from_counts(n, self.confusion.concat())?)
    }

    pub fn labels(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }
}

pub fn confusion_tsv(cm: &ConfusionMatrix, labels: &[String]) -> String {
    let mut s = String::from("truth\\predicted");
    for l in labels {
        write!(s, "\t{l}").unwrap();
    }
    s.push('\n');
    for (t, l) in labels.iter().enumerate().take(cm.num_classes()) {
        s.push_str(l);
        for c in cm.row(t) {
            write!(s, "\t{c}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

pub fn summary_text(r: &MetricsReport) -> String {
    let mut s = String::new();
    writeln!(s, "checkpoint: {}", r.checkpoint).unwrap();
    writeln!(s, "dataset:    {} ({} windows)", r.dataset, r.total).unwrap();
    writeln!(s, "accuracy (one-vs-rest): {:.4}", r.accuracy_one_vs_rest).unwrap();
    writeln!(s, "accuracy (plain):       {:.4}", r.accuracy_plain).unwrap();
    writeln!(s, "micro-F1:               {:.4}", r.f1_micro).unwrap();
    let width = r.classes.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    writeln!(s, "{:<width$}  precision  recall  support", "class").unwrap();
    for c in &r.classes {
        writeln!(
            s,
            "{:<width$}  {:>9}  {:>6}  {:>7}",
            c.name,
            opt(c.precision),
            opt(c.recall),
            c.support
        )
        .unwrap();
    }
    s
}

const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b001, 0b001, 0b001],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

const SCALE: usize = 2;
const GLYPH_W: usize = 3 * SCALE;
const GLYPH_H: usize = 5 * SCALE;
const GAP: usize = SCALE;

/// Row-normalized heatmap (darker = larger share of the true class) with the
/// raw count printed in each cell. Binary PGM.
pub fn heatmap_pgm(cm: &ConfusionMatrix) -> Vec<u8> {
    let n = cm.num_classes();
    let max_digits = cm.counts().iter().map(|c| c.to_string().len()).max().unwrap_or(1);
    let cell = (max_digits * (GLYPH_W + GAP) + 2 * GAP).max(GLYPH_H + 4 * GAP);
    let border = 2;
    let side = n * cell + (n + 1) * border;
    let mut img = vec![128u8; side * side];

    for t in 0..n {
        let row_sum: u64 = cm.row(t).iter().sum();
        for p in 0..n {
            let count = cm.get(t, p);
            let share = if row_sum == 0 { 0.0 } else { count as f64 / row_sum as f64 };
            let shade = (255.0 * (1.0 - share)).round() as u8;
            let x0 = border + p * (cell + border);
            let y0 = border + t * (cell + border);
            for y in y0..y0 + cell {
                img[y * side + x0..y * side + x0 + cell].fill(shade);
            }
            let ink = if shade < 128 { 255 } else { 0 };
            let text = count.to_string();
            let text_w = text.len() * (GLYPH_W + GAP) - GAP;
            let tx = x0 + (cell - text_w) / 2;
            let ty = y0 + (cell - GLYPH_H) / 2;
            for (i, ch) in text.bytes().enumerate() {
                let glyph = DIGITS[(ch - b'0') as usize];
                let gx = tx + i * (GLYPH_W + GAP);
                for (gy, bits) in glyph.iter().enumerate() {
                    for bx in 0..3 {
                        if bits >> (2 - bx) & 1 == 1 {
                            for dy in 0..SCALE {
                                let y = ty + gy * SCALE + dy;
                                let x = gx + bx * SCALE;
                                img[y * side + x..y * side + x + SCALE].fill(ink);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend_from_slice(&img);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use vimu_core::evaluation::confusion;

    fn sample() -> (ConfusionMatrix, Vec<String>) {
        let cm = confusion(&[0, 1, 2, 0], &[0, 1, 2, 2], 3).unwrap();
        (cm, vec!["a".into(), "b".into(), "c".into()])
    }

    #[test]
    fn report_fields() {
        let (cm, labels) = sample();
        let r = MetricsReport::new(&cm, &labels, "m".into(), "d".into(), Value::Null).unwrap();
        assert_eq!(r.accuracy_plain, 0.75);
        assert!((r.accuracy_one_vs_rest - 10.0 / 12.0).abs() < 1e-15);
        assert_eq!(r.f1_micro, 0.75);
        assert_eq!(r.classes[0].precision, Some(0.5));
        assert_eq!(r.classes[2].recall, Some(0.5));
        let back: MetricsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.confusion_matrix().unwrap(), cm);
    }

    #[test]
    fn tsv_layout() {
        let (cm, labels) = sample();
        let tsv = confusion_tsv(&cm, &labels);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "truth\\predicted\ta\tb\tc");
        assert_eq!(lines[3], "c\t1\t0\t1");
    }

    #[test]
    fn pgm_header_and_size() {
        let (cm, _) = sample();
        let img = heatmap_pgm(&cm);
        let text = String::from_utf8_lossy(&img[..16]).to_string();
        let mut parts = text.split_whitespace();
        assert_eq!(parts.next(), Some("P5"));
        let w: usize = parts.next().unwrap().parse().unwrap();
        let h: usize = parts.next().unwrap().parse().unwrap();
        let header_len = format!("P5\n{w} {h}\n255\n").len();
        assert_eq!(img.len(), header_len + w * h);
        // a fully predicted class renders as a black cell with white digits
        assert!(img[header_len..].contains(&0));
        assert!(img[header_len..].contains(&255));
    }
}
