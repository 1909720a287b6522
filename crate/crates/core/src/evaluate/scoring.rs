use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EpochDataset;
use crate::signalio::AnnotationTrack;

/// Hybrid counts: episodes for TP/FN, NORMAL epochs for TN/FP.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp_events: u64,
    pub fn_events: u64,
    pub tn_epochs: u64,
    pub fp_epochs: u64,
}

impl ConfusionCounts {
    pub fn episodes(&self) -> u64 {
        self.tp_events + self.fn_events
    }
}

/// An episode is detected when a positive epoch meets
/// `[onset - buffer, offset]`; every NORMAL epoch is a TN or FP.
pub fn score_events(
    data: &EpochDataset,
    predictions: &[bool],
    ann: &AnnotationTrack,
    buffer_s: f64,
) -> Result<ConfusionCounts> {
    if predictions.len() != data.len() {
        return Err(Error::Alignment(format!(
            "{} predictions for {} epochs",
            predictions.len(),
            data.len()
        )));
    }
    let w = data.window_s;
    let mut c = ConfusionCounts::default();
    for ep in ann.fog_episodes() {
        let hit = data
            .epochs
            .iter()
            .zip(predictions)
            .any(|(e, &p)| p && ep.intersects(e.start_s, e.end_s(w), buffer_s));
        if hit {
            c.tp_events += 1;
        } else {
            c.fn_events += 1;
        }
    }
    for (e, &p) in data.epochs.iter().zip(predictions) {
        if !e.label.is_fog() {
            if p {
                c.fp_epochs += 1;
            } else {
                c.tn_epochs += 1;
            }
        }
    }
    Ok(c)
}

/// Which rates came from a 0/0 and were set to 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degenerate {
    pub sensitivity: bool,
    pub specificity: bool,
    pub precision: bool,
    pub mcc: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.sensitivity || self.specificity || self.precision || self.mcc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub mcc: f64,
    pub degenerate: Degenerate,
}

fn ratio(num: f64, den: f64, flag: &mut bool) -> f64 {
    if den == 0.0 {
        *flag = true;
        0.0
    } else {
        num / den
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let (tp, fn_, tn, fp) = (c.tp_events as f64, c.fn_events as f64, c.tn_epochs as f64, c.fp_epochs as f64);
    let mut d = Degenerate::default();
    let sensitivity = ratio(tp, tp + fn_, &mut d.sensitivity);
    let specificity = ratio(tn, tn + fp, &mut d.specificity);
    let precision = ratio(tp, tp + fp, &mut d.precision);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, den, &mut d.mcc);
    Metrics { sensitivity, specificity, precision, mcc, degenerate: d }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMetrics {
    pub subject_id: String,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub pr_auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single subject.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub subjects: Vec<SubjectMetrics>,
    pub sensitivity: MeanStd,
    pub specificity: MeanStd,
    pub precision: MeanStd,
    pub mcc: MeanStd,
    pub pr_auc: MeanStd,
}

impl MetricsReport {
    pub fn new(subjects: Vec<SubjectMetrics>) -> Self {
        let col = |f: &dyn Fn(&SubjectMetrics) -> f64| MeanStd::of(&subjects.iter().map(f).collect::<Vec<_>>());
        let aucs: Vec<f64> = subjects.iter().filter_map(|s| s.pr_auc).collect();
        MetricsReport {
            sensitivity: col(&|s| s.metrics.sensitivity),
            specificity: col(&|s| s.metrics.specificity),
            precision: col(&|s| s.metrics.precision),
            mcc: col(&|s| s.metrics.mcc),
            pr_auc: MeanStd::of(&aucs),
            subjects,
        }
    }

    /// One row per subject, then `mean` and `std` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "subject_id", "tp_events", "fn_events", "tn_epochs", "fp_epochs", "sensitivity", "specificity",
            "precision", "mcc", "pr_auc", "degenerate",
        ])?;
        let f = |v: f64| format!("{v:?}");
        for s in &self.subjects {
            let c = &s.counts;
            let m = &s.metrics;
            w.write_record([
                s.subject_id.clone(),
                c.tp_events.to_string(),
                c.fn_events.to_string(),
                c.tn_epochs.to_string(),
                c.fp_epochs.to_string(),
                f(m.sensitivity),
                f(m.specificity),
                f(m.precision),
                f(m.mcc),
                s.pr_auc.map_or("NA".into(), f),
                m.degenerate.any().to_string(),
            ])?;
        }
        for (name, pick) in [("mean", true), ("std", false)] {
            let g = |ms: MeanStd| f(if pick { ms.mean } else { ms.std });
            w.write_record([
                name.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                g(self.sensitivity),
                g(self.specificity),
                g(self.precision),
                g(self.mcc),
                g(self.pr_auc),
                String::new(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
