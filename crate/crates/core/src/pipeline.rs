//! Subject-level glue: common-rate resampling, the eight feature series,
//! epoch datasets and the freezing-vs-turning characterization.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterize::{
    extract_freezing_segments, match_control_segments, normalize_segments, pointwise_ttest, Group, TTestBand,
};
use crate::error::{Error, Result};
use crate::evaluate::{causal_epochs, epochize, label_epochs};
use crate::features::{
    estimate_turn_direction, freeze_index, heart_rate, merge_turn_directions, slow_phase_velocity, stride_duration,
    theta_power, turning_phase, FeatureKind, FeatureSeries, FootswitchConfig, SubjectSwitches, ThetaParams,
};
use crate::model::{EpochDataset, FeatureMode};
use crate::signalio::{
    adjudicate, annotation_path, load_recording_pair, read_annotations, resample_channel, AnnotationTrack, EogAxis,
    FrameGrid, Placement, Recording, AGREEMENT_FRAME_S,
};

/// Every channel is brought to this rate before feature extraction.
pub const COMMON_RATE_HZ: f64 = 500.0;
pub const CONSENSUS_RATER: &str = "consensus";
pub const FOOTSWITCH_FILE: &str = "footswitch.toml";
const ANNOTATION_SUFFIX: &str = ".annotations.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureParams {
    pub theta: ThetaParams,
    /// Seed of the slow-phase k-means.
    pub spv_seed: u64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams { theta: ThetaParams::default(), spv_seed: 7 }
    }
}

/// Resamples faster channels down to the common rate and trims every
/// channel to the shortest length.
pub fn to_common_rate(rec: &Recording) -> Result<Recording> {
    let mut channels = rec
        .channels
        .par_iter()
        .map(|c| resample_channel(c, COMMON_RATE_HZ))
        .collect::<Result<Vec<_>>>()?;
    let n = channels.iter().map(|c| c.samples.len()).min().unwrap_or(0);
    channels.iter_mut().for_each(|c| c.samples.truncate(n));
    Ok(Recording { subject_id: rec.subject_id.clone(), channels, duration_s: n as f64 / COMMON_RATE_HZ })
}

/// Feature series of one subject, in `FeatureKind::ALL` order, plus the
/// turning phase used to match control segments.
#[derive(Debug, Clone)]
pub struct SubjectFeatures {
    pub subject_id: String,
    pub series: Vec<FeatureSeries>,
    pub turning_phase: Vec<f64>,
}

impl SubjectFeatures {
    pub fn get(&self, kind: FeatureKind) -> &FeatureSeries {
        self.series.iter().find(|s| s.kind == kind).expect("every kind is extracted")
    }
}

fn missing(what: &str, subject: &str) -> Error {
    Error::Validation(format!("recording {subject} has no {what} channel(s)"))
}

/// Offline (zero-phase) features from a common-rate recording.
pub fn extract_features(rec: &Recording, switches: &SubjectSwitches, params: &FeatureParams) -> Result<SubjectFeatures> {
    let id = rec.subject_id.as_str();
    if let Some(c) = rec.channels.iter().find(|c| c.rate_hz != COMMON_RATE_HZ) {
        return Err(Error::Validation(format!("channel {} is at {} Hz; resample first", c.label, c.rate_hz)));
    }
    let fz = rec.eeg("Fz").ok_or_else(|| missing("EEG Fz", id))?;
    let cz = rec.eeg("Cz").ok_or_else(|| missing("EEG Cz", id))?;
    let eog_h = rec.eog(EogAxis::Horizontal).ok_or_else(|| missing("horizontal EOG", id))?;
    let leads = rec.ecg_leads();
    if leads.is_empty() {
        return Err(missing("ECG", id));
    }
    let switch_channels = rec.footswitches();

    let theta = || theta_power(fz, cz, &params.theta);
    let spv = || -> Result<(FeatureSeries, Vec<f64>)> {
        let raw = slow_phase_velocity(eog_h, params.spv_seed)?;
        let phase = turning_phase(&raw)?;
        let merged = merge_turn_directions(&raw, &estimate_turn_direction(eog_h)?)?;
        Ok((merged, phase))
    };
    let hr = || heart_rate(&leads);
    let fi = |p: Placement| -> Result<FeatureSeries> {
        let axes = rec.accel(p).ok_or_else(|| missing(&format!("{p} accelerometer"), id))?;
        Ok(freeze_index(axes)?.series)
    };
    let stride = || stride_duration(&switch_channels, &switches.keys, &switches.thresholds_v);

    let ((theta, spv), (hr, (fis, stride))) = rayon::join(
        || rayon::join(theta, spv),
        || {
            rayon::join(hr, || {
                rayon::join(
                    || Placement::ALL.par_iter().map(|&p| fi(p)).collect::<Result<Vec<_>>>(),
                    stride,
                )
            })
        },
    );
    let (spv, phase) = spv?;
    let mut series = vec![theta?, spv, hr?];
    series.extend(fis?);
    series.push(stride?);
    debug_assert!(series.iter().map(|s| s.kind).eq(FeatureKind::ALL));
    Ok(SubjectFeatures { subject_id: id.to_string(), series, turning_phase: phase })
}

/// Epochs of one subject, labeled against its annotations.
pub fn subject_epochs(
    features: &SubjectFeatures,
    ann: &AnnotationTrack,
    window_s: f64,
    overlap: f64,
    buffer_s: f64,
) -> Result<EpochDataset> {
    let ds = epochize(&features.series, &features.subject_id, window_s, overlap)?;
    Ok(label_epochs(&ds, &features.subject_id, ann, buffer_s))
}

/// Labeled epochs of a raw recording. Offline mode resamples and uses the
/// zero-phase extractors; causal mode runs the streaming extractor at the
/// native rates.
#[allow(clippy::too_many_arguments)]
pub fn recording_epochs(
    rec: &Recording,
    switches: &SubjectSwitches,
    ann: &AnnotationTrack,
    params: &FeatureParams,
    mode: FeatureMode,
    window_s: f64,
    overlap: f64,
    buffer_s: f64,
) -> Result<EpochDataset> {
    match mode {
        FeatureMode::Offline => {
            let features = extract_features(&to_common_rate(rec)?, switches, params)?;
            subject_epochs(&features, ann, window_s, overlap, buffer_s)
        }
        FeatureMode::Causal => {
            let ds = causal_epochs(rec, switches, params, window_s, overlap)?;
            Ok(label_epochs(&ds, &rec.subject_id, ann, buffer_s))
        }
    }
}

/// Reference annotation of a subject: the consensus track when present,
/// else frame-wise adjudication of the first two raters by the third, else
/// the only track.
pub fn reference_track(tracks: &[AnnotationTrack], span_s: f64) -> Result<AnnotationTrack> {
    if let Some(t) = tracks.iter().find(|t| t.rater_id == CONSENSUS_RATER) {
        return Ok(t.clone());
    }
    match tracks {
        [] => Err(Error::Validation("no annotation tracks".into())),
        [only] => Ok(only.clone()),
        [a, b] => {
            log::warn!("two raters and no consensus; using {}", a.rater_id);
            let _ = b;
            Ok(a.clone())
        }
        [a, b, tie, ..] => Ok(adjudicate(a, b, tie, &FrameGrid::new(span_s, AGREEMENT_FRAME_S)?)),
    }
}

/// Subject ids of a dataset directory, from its annotation files.
pub fn list_subjects(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut ids = Vec::new();
    for e in entries {
        let name = e.map_err(|e| Error::io(dir, e))?.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(ANNOTATION_SUFFIX) {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(Error::Validation(format!("{} holds no annotated recordings", dir.display())));
    }
    Ok(ids)
}

/// A subject loaded from disk.
#[derive(Debug, Clone)]
pub struct LoadedSubject {
    pub recording: Recording,
    pub tracks: Vec<AnnotationTrack>,
    pub reference: AnnotationTrack,
    pub switches: SubjectSwitches,
}

pub fn load_subject(dir: &Path, id: &str, footswitch: &FootswitchConfig) -> Result<LoadedSubject> {
    let recording = load_recording_pair(dir, id)?;
    let tracks = read_annotations(&annotation_path(dir, id))?;
    let reference = reference_track(&tracks, recording.duration_s)?;
    let switches = footswitch.subject(id)?.clone();
    Ok(LoadedSubject { recording, tracks, reference, switches })
}

pub fn read_footswitch_config(dir: &Path) -> Result<FootswitchConfig> {
    FootswitchConfig::read(&dir.join(FOOTSWITCH_FILE))
}

/// Pointwise freezing-vs-turning comparison for one feature.
#[derive(Debug, Clone)]
pub struct Characterization {
    pub kind: FeatureKind,
    pub n_freezing: usize,
    pub n_control: usize,
    pub unmatched: usize,
    pub band: TTestBand,
}

/// For each feature: isolated freezing segments, phase-matched turning
/// controls, per-subject normalization over both groups and the pointwise
/// Welch band.
pub fn characterize(
    subjects: &[SubjectFeatures],
    annotations: &BTreeMap<String, AnnotationTrack>,
) -> Result<Vec<Characterization>> {
    FeatureKind::ALL
        .par_iter()
        .map(|&kind| {
            let mut all = Vec::new();
            let mut unmatched = 0;
            for s in subjects {
                let ann = annotations
                    .get(&s.subject_id)
                    .ok_or_else(|| Error::Validation(format!("no annotations for {}", s.subject_id)))?;
                let fs = s.get(kind);
                let freezing = extract_freezing_segments(fs, ann, &s.subject_id);
                let m = match_control_segments(fs, &s.turning_phase, &freezing, ann)?;
                unmatched += m.unmatched.len();
                all.extend(freezing);
                all.extend(m.controls);
            }
            let norm = normalize_segments(&all)?;
            let (a, b): (Vec<_>, Vec<_>) = norm.into_iter().partition(|s| s.group == Group::Freezing);
            let band = pointwise_ttest(&a, &b)?;
            Ok(Characterization { kind, n_freezing: a.len(), n_control: b.len(), unmatched, band })
        })
        .collect()
}
