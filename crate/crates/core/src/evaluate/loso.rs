use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pr::{pr_curve, PrCurve};
use super::scoring::{metrics, score_events, ConfusionCounts, Metrics, MetricsReport, SubjectMetrics};
use crate::characterize::{bonferroni, wilcoxon_signed_rank};
use crate::error::{Error, Result};
use crate::model::{train_rusboost, BoostParams, DetectorModel, EpochDataset, FeatureMode, Imputer};
use crate::select::{Discretizer, SelectionReport};
use crate::signalio::AnnotationTrack;

/// Where the feature subset of each fold comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "features")]
pub enum SelectionMode {
    /// FCBF on the training subjects of each fold.
    PerFold,
    /// FCBF once on every subject (leaks the held-out labels into selection).
    Global,
    /// A fixed list of feature names.
    Fixed(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoParams {
    pub selection: SelectionMode,
    pub su_threshold: f64,
    pub discretizer: Discretizer,
    pub boost: BoostParams,
    pub tau: f64,
    pub buffer_s: f64,
    pub feature_mode: FeatureMode,
}

impl Default for LosoParams {
    fn default() -> Self {
        LosoParams {
            selection: SelectionMode::PerFold,
            su_threshold: crate::select::DEFAULT_SU_THRESHOLD,
            discretizer: Discretizer::default(),
            boost: BoostParams::default(),
            tau: 0.5,
            buffer_s: super::FOG_BUFFER_S,
            feature_mode: FeatureMode::Offline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub subject_id: String,
    pub selected: Vec<String>,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub pr: PrCurve,
    pub scores: Vec<f64>,
    pub model: DetectorModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoReport {
    pub folds: Vec<FoldResult>,
    pub skipped: Vec<String>,
    pub report: MetricsReport,
}

/// FCBF over the given epochs, with missing values imputed by column
/// medians.
pub fn select_features(data: &EpochDataset, discretizer: Discretizer, threshold: f64) -> Result<SelectionReport> {
    let rows: Vec<&[Option<f64>]> = data.epochs.iter().map(|e| e.features.as_slice()).collect();
    let imputer = Imputer::fit(&rows, data.n_features());
    let columns: Vec<Vec<f64>> = (0..data.n_features())
        .map(|j| data.epochs.iter().map(|e| e.features[j].unwrap_or(imputer.medians[j])).collect())
        .collect();
    let labels: Vec<usize> = data.epochs.iter().map(|e| usize::from(e.label.is_fog())).collect();
    SelectionReport::run(data.feature_names.clone(), &columns, &labels, discretizer, threshold)
}

fn resolve_selection(data: &EpochDataset, params: &LosoParams, global: Option<&[usize]>) -> Result<Vec<usize>> {
    match &params.selection {
        SelectionMode::Fixed(names) => names
            .iter()
            .map(|n| {
                data.feature_index(n)
                    .ok_or_else(|| Error::Config(format!("unknown feature {n:?} in fixed selection")))
            })
            .collect(),
        SelectionMode::Global => Ok(global.expect("global selection computed up front").to_vec()),
        SelectionMode::PerFold => {
            let report = select_features(data, params.discretizer, params.su_threshold)?;
            if report.selected.is_empty() {
                return Err(Error::Validation("no feature carries information about the class".into()));
            }
            Ok(report.selected)
        }
    }
}

/// Selection and training for the fold that holds out `held_out`. Only
/// epochs of other subjects are read.
pub fn train_fold(
    data: &EpochDataset,
    held_out: &str,
    params: &LosoParams,
    global: Option<&[usize]>,
) -> Result<DetectorModel> {
    let train = data.filter(|e| e.subject_id != held_out);
    let selected = resolve_selection(&train, params, global)?;
    train_rusboost(&train, &selected, &params.boost, params.feature_mode)
}

fn global_selection(data: &EpochDataset, params: &LosoParams) -> Result<Option<Vec<usize>>> {
    if params.selection != SelectionMode::Global {
        return Ok(None);
    }
    let report = select_features(data, params.discretizer, params.su_threshold)?;
    if report.selected.is_empty() {
        return Err(Error::Validation("no feature carries information about the class".into()));
    }
    Ok(Some(report.selected))
}

/// Leave-one-subject-out evaluation. Subjects without FOG episodes are
/// skipped; folds run in parallel.
pub fn loso_cv(
    data: &EpochDataset,
    annotations: &BTreeMap<String, AnnotationTrack>,
    params: &LosoParams,
) -> Result<LosoReport> {
    let subjects = data.subjects();
    if subjects.len() < 2 {
        return Err(Error::SampleSize(format!("LOSO needs at least 2 subjects, got {}", subjects.len())));
    }
    let mut evaluated = Vec::new();
    let mut skipped = Vec::new();
    for s in subjects {
        match annotations.get(&s) {
            Some(ann) if ann.fog_episodes().next().is_some() => evaluated.push(s),
            _ => {
                log::warn!("subject {s} has no FOG episodes; skipped as a held-out fold");
                skipped.push(s);
            }
        }
    }
    let global = global_selection(data, params)?;

    let folds = evaluated
        .par_iter()
        .map(|s| {
            let model = train_fold(data, s, params, global.as_deref())?;
            let test = data.subject(s);
            let ann = &annotations[s];
            let scores = model.predict_scores(&test)?;
            let pred: Vec<bool> = scores.iter().map(|&v| v >= params.tau).collect();
            let counts = score_events(&test, &pred, ann, params.buffer_s)?;
            let pr = pr_curve(&scores, &test, ann, params.buffer_s)?;
            Ok(FoldResult {
                subject_id: s.clone(),
                selected: model.selected_names().iter().map(|n| n.to_string()).collect(),
                metrics: metrics(&counts),
                counts,
                pr,
                scores,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = MetricsReport::new(
        folds
            .iter()
            .map(|f| SubjectMetrics {
                subject_id: f.subject_id.clone(),
                counts: f.counts,
                metrics: f.metrics,
                pr_auc: Some(f.pr.auc),
            })
            .collect(),
    );
    Ok(LosoReport { folds, skipped, report })
}

/// For every subject, retrains its fold after scrambling that subject's
/// labels and features and reports whether the model came out identical.
pub fn leakage_probe(data: &EpochDataset, params: &LosoParams) -> Result<Vec<(String, bool)>> {
    if params.selection == SelectionMode::Global {
        return Err(Error::Config("global selection reads held-out labels by design".into()));
    }
    data.subjects()
        .par_iter()
        .map(|s| {
            let clean = train_fold(data, s, params, None)?;
            let mut poisoned = data.clone();
            for e in poisoned.epochs.iter_mut().filter(|e| &e.subject_id == s) {
                e.label = if e.label.is_fog() { crate::model::EpochLabel::Normal } else { crate::model::EpochLabel::Fog };
                e.features.iter_mut().for_each(|v| *v = v.map(|x| -x * 1e3 + 7.0));
            }
            let dirty = train_fold(&poisoned, s, params, None)?;
            Ok((s.clone(), clean == dirty))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub n_nonzero: usize,
    /// `None` when fewer than 5 pairs differ.
    pub p: Option<f64>,
    pub p_bonferroni: Option<f64>,
}

/// Paired Wilcoxon tests of the multi-modal MCC against each single-modal
/// system, Bonferroni-adjusted over the number of comparisons.
pub fn compare_systems(multi: &[f64], singles: &[(String, Vec<f64>)]) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for (name, single) in singles {
        if single.len() != multi.len() {
            return Err(Error::Alignment(format!(
                "system {name} has {} subjects, multi-modal has {}",
                single.len(),
                multi.len()
            )));
        }
        let diffs: Vec<f64> = multi.iter().zip(single).map(|(a, b)| a - b).collect();
        let n_nonzero = diffs.iter().filter(|d| **d != 0.0).count();
        let p = match wilcoxon_signed_rank(&diffs) {
            Ok(p) => Some(p),
            Err(Error::InsufficientPairs { nonzero, required }) => {
                log::warn!("{name}: {nonzero} non-zero pairs, need {required}; p reported as NA");
                None
            }
            Err(e) => return Err(e),
        };
        out.push(Comparison { name: name.clone(), n_nonzero, p, p_bonferroni: None });
    }
    let m = out.len();
    for c in &mut out {
        c.p_bonferroni = match c.p {
            Some(p) => Some(bonferroni(&[p], m)?[0]),
            None => None,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::{Epoch, EpochLabel};
    use crate::signalio::Episode;

    /// A subject with FOG episodes every 20 s; feature 0 is separable, the
    /// other is noise.
    fn subject(id: &str, seed: u64, data: &mut EpochDataset) -> AnnotationTrack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<Episode> = (0..10).map(|k| Episode::fog(15.0 + 20.0 * k as f64, 18.0 + 20.0 * k as f64)).collect();
        let ann = AnnotationTrack::new("consensus", eps).unwrap();
        let mut ds = EpochDataset::new(data.feature_names.clone(), 2.56);
        for k in 0..170 {
            ds.epochs.push(Epoch { subject_id: id.into(), start_s: k as f64 * 1.28, features: vec![None, None], label: EpochLabel::Normal });
        }
        let mut ds = super::super::label_epochs(&ds, id, &ann, 3.0);
        for e in &mut ds.epochs {
            let base = if e.label.is_fog() { 3.0 } else { 0.0 };
            e.features = vec![Some(base + rng.random_range(0.0..1.0)), Some(rng.random_range(0.0..1.0))];
        }
        data.extend(ds).unwrap();
        ann
    }

    fn two_identical() -> (EpochDataset, BTreeMap<String, AnnotationTrack>) {
        let mut data = EpochDataset::new(vec!["good".into(), "noise".into()], 2.56);
        let mut anns = BTreeMap::new();
        anns.insert("s1".to_string(), subject("s1", 9, &mut data));
        anns.insert("s2".to_string(), subject("s2", 9, &mut data));
        (data, anns)
    }

    fn params() -> LosoParams {
        LosoParams { discretizer: Discretizer::Mdl, boost: BoostParams { n_rounds: 20, seed: 3, ..BoostParams::default() }, ..LosoParams::default() }
    }

    #[test]
    fn duplicate_separable_subjects_are_detected() {
        let (data, anns) = two_identical();
        let r = loso_cv(&data, &anns, &params()).unwrap();
        assert_eq!(r.folds.len(), 2);
        for f in &r.folds {
            assert!(f.metrics.mcc >= 0.95, "{}", f.metrics.mcc);
            assert_eq!(f.selected, vec!["good".to_string()]);
        }
    }

    #[test]
    fn subjects_without_episodes_are_skipped() {
        let (mut data, mut anns) = two_identical();
        let mut extra = data.subject("s2");
        extra.epochs.iter_mut().for_each(|e| {
            e.subject_id = "s3".into();
        });
        data.extend(extra).unwrap();
        anns.insert("s3".into(), AnnotationTrack::new("consensus", vec![]).unwrap());
        let r = loso_cv(&data, &anns, &params()).unwrap();
        assert_eq!(r.folds.len(), 2);
        assert_eq!(r.skipped, vec!["s3".to_string()]);
    }

    #[test]
    fn held_out_subject_never_reaches_training() {
        let (data, _) = two_identical();
        let probe = leakage_probe(&data, &params()).unwrap();
        assert_eq!(probe.len(), 2);
        assert!(probe.iter().all(|(_, same)| *same));
        let global = LosoParams { selection: SelectionMode::Global, ..params() };
        assert!(leakage_probe(&data, &global).is_err());
    }

    #[test]
    fn single_subject_is_rejected() {
        let (data, anns) = two_identical();
        assert!(matches!(loso_cv(&data.subject("s1"), &anns, &params()), Err(Error::SampleSize(_))));
    }

    #[test]
    fn comparison_conventions() {
        let multi = [0.9, 0.8, 0.85, 0.95, 0.7, 0.75];
        let worse: Vec<f64> = multi.iter().map(|m| m - 0.1).collect();
        let out = compare_systems(&multi, &[("same".into(), multi.to_vec()), ("worse".into(), worse)]).unwrap();
        assert_eq!(out[0].p, Some(1.0));
        assert_eq!(out[0].p_bonferroni, Some(1.0));
        assert_eq!(out[1].p, Some(2.0 / 64.0));
        assert_eq!(out[1].p_bonferroni, Some(4.0 / 64.0));
        let few = compare_systems(&multi[..4], &[("x".into(), vec![0.0; 4])]).unwrap();
        assert_eq!(few[0].p, None);
    }
}
