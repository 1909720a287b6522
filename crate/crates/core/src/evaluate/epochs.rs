use crate::error::{Error, Result};
use crate::features::FeatureSeries;
use crate::model::{Epoch, EpochDataset, EpochLabel};
use crate::signalio::AnnotationTrack;

pub const EPOCH_WINDOW_S: f64 = 2.56;
pub const EPOCH_OVERLAP: f64 = 0.5;
/// Seconds before onset that still count as part of an episode.
pub const FOG_BUFFER_S: f64 = 3.0;

/// Window and hop, in samples, for a feature clock.
pub fn epoch_geometry(rate_hz: f64, window_s: f64, overlap: f64) -> Result<(usize, usize)> {
    if !(window_s > 0.0) || !window_s.is_finite() {
        return Err(Error::param("window_s", format!("{window_s} is not positive")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::param("overlap", format!("{overlap} is outside [0, 1)")));
    }
    let win = (window_s * rate_hz).round() as usize;
    let hop = ((window_s * (1.0 - overlap)) * rate_hz).round() as usize;
    if win == 0 || hop == 0 {
        return Err(Error::param("window_s", "window shorter than one sample"));
    }
    Ok((win, hop))
}

/// Window means of each feature. Epoch `k` starts at `k * window * (1 -
/// overlap)`; a feature is missing in an epoch when more than half its
/// samples are, and the epoch is dropped when more than half its features
/// are missing. Labels start out NORMAL.
pub fn epochize(
    series: &[FeatureSeries],
    subject_id: &str,
    window_s: f64,
    overlap: f64,
) -> Result<EpochDataset> {
    let names = series.iter().map(|s| s.kind.name()).collect();
    let mut ds = EpochDataset::new(names, window_s);
    let Some(first) = series.first() else {
        return Ok(ds);
    };
    let rate = first.rate_hz;
    if let Some(s) = series.iter().find(|s| s.rate_hz != rate || s.len() != first.len()) {
        return Err(Error::Alignment(format!(
            "feature {} has {} samples at {} Hz, expected {} at {rate} Hz",
            s.kind,
            s.len(),
            s.rate_hz,
            first.len()
        )));
    }
    let (win, hop) = epoch_geometry(rate, window_s, overlap)?;
    let n = first.len();
    if n < win {
        return Ok(ds);
    }
    let hop_s = window_s * (1.0 - overlap);
    for k in 0..=(n - win) / hop {
        let range = k * hop..k * hop + win;
        let features: Vec<Option<f64>> = series.iter().map(|s| window_mean(&s.values[range.clone()])).collect();
        if 2 * features.iter().filter(|f| f.is_none()).count() > features.len() {
            continue;
        }
        ds.epochs.push(Epoch {
            subject_id: subject_id.to_string(),
            start_s: k as f64 * hop_s,
            features,
            label: EpochLabel::Normal,
        });
    }
    Ok(ds)
}

/// Mean of defined values; `None` when more than half are missing.
pub fn window_mean(values: &[Option<f64>]) -> Option<f64> {
    let (sum, count) = values
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 || 2 * count < values.len() {
        None
    } else {
        Some(sum / count as f64)
    }
}

/// FOG when the window meets `[onset - buffer, offset]` of a FOG episode;
/// windows that meet an OTHER_STOP episode are removed. Epochs of other
/// subjects are left untouched.
pub fn label_epochs(data: &EpochDataset, subject_id: &str, ann: &AnnotationTrack, buffer_s: f64) -> EpochDataset {
    let w = data.window_s;
    let mut out = EpochDataset::new(data.feature_names.clone(), w);
    for e in &data.epochs {
        if e.subject_id != subject_id {
            out.epochs.push(e.clone());
            continue;
        }
        let (s, end) = (e.start_s, e.end_s(w));
        if ann.other_stops().any(|ep| ep.intersects(s, end, 0.0)) {
            continue;
        }
        let fog = ann.fog_episodes().any(|ep| ep.intersects(s, end, buffer_s));
        out.epochs.push(Epoch { label: if fog { EpochLabel::Fog } else { EpochLabel::Normal }, ..e.clone() });
    }
    out
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::features::FeatureKind;
    use crate::signalio::Episode;

    fn constant(kind: FeatureKind, c: f64, secs: f64) -> FeatureSeries {
        FeatureSeries::new(kind, 500.0, vec![Some(c); (secs * 500.0) as usize])
    }

    #[test]
    fn ten_seconds_give_six_epochs() {
        let ds = epochize(&[constant(FeatureKind::Spv, 2.5, 10.0)], "s", EPOCH_WINDOW_S, EPOCH_OVERLAP).unwrap();
        let starts: Vec<f64> = ds.epochs.iter().map(|e| e.start_s).collect();
        let want = ((10.0f64 - 2.56) / 1.28).floor() as usize + 1;
        assert_eq!(starts.len(), want);
        assert_eq!(want, 6);
        for (k, s) in starts.iter().enumerate() {
            assert!((s - 1.28 * k as f64).abs() < 1e-12);
        }
        assert!(ds.epochs.iter().all(|e| e.features == vec![Some(2.5)]));
    }

    #[test]
    fn short_recording_gives_empty_dataset() {
        let ds = epochize(&[constant(FeatureKind::Spv, 1.0, 2.0)], "s", EPOCH_WINDOW_S, EPOCH_OVERLAP).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn means_match_brute_force_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 6000;
        let vals: Vec<Option<f64>> = (0..n)
            .map(|i| if (i / 300) % 5 == 4 { None } else { Some(rng.random_range(-1.0..1.0)) })
            .collect();
        let s = FeatureSeries::new(FeatureKind::HeartRate, 500.0, vals.clone());
        let ds = epochize(&[s], "s", EPOCH_WINDOW_S, EPOCH_OVERLAP).unwrap();
        assert_eq!(ds.len(), (n - 1280) / 640 + 1);
        for e in &ds.epochs {
            let i0 = (e.start_s * 500.0).round() as usize;
            let def: Vec<f64> = vals[i0..i0 + 1280].iter().flatten().copied().collect();
            let want = def.iter().sum::<f64>() / def.len() as f64;
            assert!((e.features[0].unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mostly_missing_epochs_are_dropped() {
        let a = FeatureSeries::missing(FeatureKind::Spv, 500.0, 5000);
        let b = FeatureSeries::missing(FeatureKind::HeartRate, 500.0, 5000);
        let c = constant(FeatureKind::StrideDuration, 1.0, 10.0);
        assert!(epochize(&[a.clone(), b, c.clone()], "s", 2.56, 0.5).unwrap().is_empty());
        let ds = epochize(&[a, c], "s", 2.56, 0.5).unwrap();
        assert_eq!(ds.len(), 6);
        assert!(ds.epochs.iter().all(|e| e.features == vec![None, Some(1.0)]));
    }

    #[test]
    fn misaligned_features_are_rejected() {
        let a = constant(FeatureKind::Spv, 1.0, 10.0);
        let b = constant(FeatureKind::HeartRate, 1.0, 9.0);
        assert!(matches!(epochize(&[a, b], "s", 2.56, 0.5), Err(Error::Alignment(_))));
    }

    fn dataset(starts: &[f64]) -> EpochDataset {
        let mut ds = EpochDataset::new(vec!["x".into()], EPOCH_WINDOW_S);
        for &s in starts {
            ds.epochs.push(Epoch { subject_id: "s".into(), start_s: s, features: vec![Some(0.0)], label: EpochLabel::Normal });
        }
        ds
    }

    #[test]
    fn labeling_rule_examples() {
        let ann = AnnotationTrack::new("c", vec![Episode::fog(10.0, 13.0)]).unwrap();
        let ds = label_epochs(&dataset(&[7.68, 0.0]), "s", &ann, FOG_BUFFER_S);
        assert_eq!(ds.epochs[0].label, EpochLabel::Fog);
        assert_eq!(ds.epochs[1].label, EpochLabel::Normal);
        let other = AnnotationTrack::new("c", vec![Episode::other_stop(1.0, 2.0), Episode::fog(30.0, 33.0)]).unwrap();
        let ds = label_epochs(&dataset(&[0.0, 2.56, 26.0]), "s", &other, FOG_BUFFER_S);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.epochs[0].start_s, 2.56);
        assert_eq!(ds.epochs[1].label, EpochLabel::Fog);
    }

    #[test]
    fn labels_match_interval_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut eps = Vec::new();
            let mut t = rng.random_range(0.0..10.0);
            while t < 200.0 {
                let d = rng.random_range(0.5..8.0);
                eps.push(if rng.random::<f64>() < 0.2 { Episode::other_stop(t, t + d) } else { Episode::fog(t, t + d) });
                t += d + rng.random_range(0.5..20.0);
            }
            let ann = AnnotationTrack::new("c", eps.clone()).unwrap();
            let starts: Vec<f64> = (0..160).map(|k| k as f64 * 1.28).collect();
            let ds = label_epochs(&dataset(&starts), "s", &ann, 3.0);
            let mut want = Vec::new();
            for &s in &starts {
                let e = s + 2.56;
                let meets = |a: f64, b: f64| s <= b && e > a;
                if eps.iter().any(|ep| !ep.label_is_fog() && meets(ep.onset_s, ep.offset_s)) {
                    continue;
                }
                let fog = eps.iter().any(|ep| ep.label_is_fog() && meets(ep.onset_s - 3.0, ep.offset_s));
                want.push((s, fog));
            }
            let got: Vec<(f64, bool)> = ds.epochs.iter().map(|e| (e.start_s, e.label.is_fog())).collect();
            assert_eq!(got, want);
        }
    }

    trait IsFog {
        fn label_is_fog(&self) -> bool;
    }

    impl IsFog for Episode {
        fn label_is_fog(&self) -> bool {
            self.label == crate::signalio::EpisodeLabel::Fog
        }
    }
}
