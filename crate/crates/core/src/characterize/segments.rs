use serde::{Deserialize, Serialize};

use crate::dsp::wrap_angle;
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureSeries};
use crate::signalio::{AnnotationTrack, Episode};

use super::stats::PHASE_TOLERANCE_RAD;

pub const PRE_ONSET_S: f64 = 10.0;
pub const POST_ONSET_S: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Group {
    Freezing,
    NormalTurning,
}

/// Feature values on the relative-time grid `[-10 s, +3 s]` around an anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub group: Group,
    pub kind: FeatureKind,
    pub subject_id: String,
    pub rate_hz: f64,
    /// Absolute time of relative zero.
    pub anchor_s: f64,
    pub values: Vec<Option<f64>>,
    /// Set by normalization when the subject's pooled values had no spread.
    pub constant: bool,
}

impl Segment {
    pub fn len_for(rate_hz: f64) -> usize {
        ((PRE_ONSET_S + POST_ONSET_S) * rate_hz).round() as usize + 1
    }

    pub fn relative_time(&self, i: usize) -> f64 {
        i as f64 / self.rate_hz - PRE_ONSET_S
    }

    /// Window in absolute seconds.
    pub fn span_s(&self) -> (f64, f64) {
        (self.anchor_s - PRE_ONSET_S, self.anchor_s + POST_ONSET_S)
    }
}

fn window_hits(ep: &Episode, start: f64, end: f64) -> bool {
    ep.onset_s < end && ep.offset_s > start
}

/// Sample range of the window anchored at sample `a`, if it fits.
fn window_at(a: usize, rate: f64, n: usize) -> Option<(usize, usize)> {
    let pre = (PRE_ONSET_S * rate).round() as usize;
    let post = (POST_ONSET_S * rate).round() as usize;
    (a >= pre && a + post < n).then(|| (a - pre, a + post))
}

fn cut(fs: &FeatureSeries, subject_id: &str, group: Group, a: usize) -> Option<Segment> {
    let (lo, hi) = window_at(a, fs.rate_hz, fs.len())?;
    Some(Segment {
        group,
        kind: fs.kind,
        subject_id: subject_id.to_string(),
        rate_hz: fs.rate_hz,
        anchor_s: a as f64 / fs.rate_hz,
        values: fs.values[lo..=hi].to_vec(),
        constant: false,
    })
}

/// One segment per isolated FOG episode whose `[-10, +3]` s window lies
/// inside the recording. An episode is isolated when its window holds no
/// other FOG episode and does not overlap another episode's window.
pub fn extract_freezing_segments(
    fs: &FeatureSeries,
    ann: &AnnotationTrack,
    subject_id: &str,
) -> Vec<Segment> {
    let fog: Vec<&Episode> = ann.fog_episodes().collect();
    let window = |ep: &Episode| (ep.onset_s - PRE_ONSET_S, ep.onset_s + POST_ONSET_S);
    fog.iter()
        .enumerate()
        .filter(|(i, ep)| {
            let (start, end) = window(ep);
            !fog.iter().enumerate().any(|(j, other)| {
                let (os, oe) = window(other);
                j != *i && (window_hits(other, start, end) || (os < end && oe > start))
            })
        })
        .filter_map(|(_, ep)| {
            let a = (ep.onset_s * fs.rate_hz).round();
            if a < 0.0 {
                return None;
            }
            cut(fs, subject_id, Group::Freezing, a as usize)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlMatch {
    pub controls: Vec<Segment>,
    /// Anchors (s) of freezing segments without a usable control.
    pub unmatched: Vec<f64>,
}

/// For each freezing segment, the control window nearest in time whose
/// turning phase at relative -10 s is within the tolerance of the freezing
/// segment's phase there, and which overlaps no FOG episode.
pub fn match_control_segments(
    fs: &FeatureSeries,
    turning_phase: &[f64],
    freezing: &[Segment],
    ann: &AnnotationTrack,
) -> Result<ControlMatch> {
    if turning_phase.len() != fs.len() {
        return Err(Error::Alignment(format!(
            "turning phase has {} samples, feature has {}",
            turning_phase.len(),
            fs.len()
        )));
    }
    let rate = fs.rate_hz;
    let n = fs.len();
    let pre = (PRE_ONSET_S * rate).round() as usize;
    let fog: Vec<&Episode> = ann.fog_episodes().collect();
    let free = |a: usize| {
        let t = a as f64 / rate;
        !fog.iter()
            .any(|ep| window_hits(ep, t - PRE_ONSET_S, t + POST_ONSET_S))
    };

    let mut controls = Vec::new();
    let mut unmatched = Vec::new();
    for seg in freezing {
        let anchor = (seg.anchor_s * rate).round() as usize;
        let target = turning_phase[anchor.saturating_sub(pre)];
        let usable = |a: usize| {
            window_at(a, rate, n).is_some()
                && wrap_angle(turning_phase[a - pre] - target).abs() <= PHASE_TOLERANCE_RAD
                && free(a)
        };
        // Walk outward from the freezing anchor, earlier side first on ties.
        let found = (1..n).find_map(|d| {
            let before = anchor.checked_sub(d).filter(|&a| usable(a));
            before.or_else(|| Some(anchor + d).filter(|&a| a < n && usable(a)))
        });
        match found.and_then(|a| cut(fs, &seg.subject_id, Group::NormalTurning, a)) {
            Some(c) => controls.push(c),
            None => {
                log::info!(
                    "subject {}: no phase-matched control for episode at {:.2} s",
                    seg.subject_id,
                    seg.anchor_s
                );
                unmatched.push(seg.anchor_s);
            }
        }
    }
    Ok(ControlMatch {
        controls,
        unmatched,
    })
}

/// Z-scores every segment with the mean and population standard deviation
/// of all defined samples of the same subject and feature, both groups
/// pooled. Constant pools become zeros and are flagged.
pub fn normalize_segments(segments: &[Segment]) -> Result<Vec<Segment>> {
    if segments.len() < 2 {
        return Err(Error::SampleSize(format!(
            "normalization needs at least 2 segments, got {}",
            segments.len()
        )));
    }
    let mut out = segments.to_vec();
    let mut keys: Vec<(&str, FeatureKind)> = segments
        .iter()
        .map(|s| (s.subject_id.as_str(), s.kind))
        .collect();
    keys.sort();
    keys.dedup();
    for (subject, kind) in keys {
        let members: Vec<usize> = (0..segments.len())
            .filter(|&i| segments[i].subject_id == subject && segments[i].kind == kind)
            .collect();
        let vals = || members.iter().flat_map(|&i| segments[i].values.iter().flatten());
        let count = vals().count();
        if count == 0 {
            continue;
        }
        let mean = vals().sum::<f64>() / count as f64;
        let var = vals().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
        let sd = var.sqrt();
        let constant = !(sd > 1e-12 * mean.abs().max(f64::MIN_POSITIVE));
        for &i in &members {
            let seg = &mut out[i];
            seg.constant = constant;
            for v in seg.values.iter_mut().flatten() {
                *v = if constant { 0.0 } else { (*v - mean) / sd };
            }
        }
    }
    Ok(out)
}
