use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EpochDataset;
use crate::signalio::AnnotationTrack;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

impl PrCurve {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["recall", "precision"])?;
        for p in &self.points {
            w.write_record([format!("{:?}", p.recall), format!("{:?}", p.precision)])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Event-level PR curve for one subject. Recall counts detected episodes;
/// precision is detected episodes over detected episodes plus FP epochs.
pub fn pr_curve(scores: &[f64], data: &EpochDataset, ann: &AnnotationTrack, buffer_s: f64) -> Result<PrCurve> {
    if scores.len() != data.len() {
        return Err(Error::Alignment(format!("{} scores for {} epochs", scores.len(), data.len())));
    }
    let w = data.window_s;
    let events: Vec<Vec<usize>> = ann
        .fog_episodes()
        .map(|ep| {
            (0..data.len())
                .filter(|&i| ep.intersects(data.epochs[i].start_s, data.epochs[i].end_s(w), buffer_s))
                .collect()
        })
        .collect();
    let negatives: Vec<usize> = (0..data.len()).filter(|&i| !data.epochs[i].label.is_fog()).collect();
    pr_curve_events(scores, &events, &negatives)
}

/// PR curve from per-epoch scores, the epochs covering each positive event
/// and the negative epochs. Thresholds sweep every distinct score plus both
/// infinities. Between achievable points precision is interpolated along
/// the TP count (Davis and Goadrich); the AUC is the trapezoid rule over the
/// interpolated curve.
pub fn pr_curve_events(scores: &[f64], events: &[Vec<usize>], negatives: &[usize]) -> Result<PrCurve> {
    let n_pos = events.len();
    if n_pos == 0 {
        return Err(Error::UndefinedCurve("no positive events".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("PR scores contain NaN".into()));
    }
    let mut event_max: Vec<f64> = events
        .iter()
        .map(|ix| ix.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut neg: Vec<f64> = negatives.iter().map(|&i| scores[i]).collect();
    event_max.sort_by(|a, b| b.total_cmp(a));
    neg.sort_by(|a, b| b.total_cmp(a));

    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    thresholds.insert(0, f64::INFINITY);
    thresholds.push(f64::NEG_INFINITY);

    // (tp, fp) at each threshold, non-decreasing in both
    let (mut ti, mut fi) = (0, 0);
    let mut achieved: Vec<(usize, usize)> = Vec::with_capacity(thresholds.len());
    for &tau in &thresholds {
        while ti < event_max.len() && event_max[ti] >= tau && event_max[ti] > f64::NEG_INFINITY {
            ti += 1;
        }
        while fi < neg.len() && neg[fi] >= tau {
            fi += 1;
        }
        if achieved.last() != Some(&(ti, fi)) {
            achieved.push((ti, fi));
        }
    }

    let p = n_pos as f64;
    let mut points: Vec<PrPoint> = Vec::new();
    for w in achieved.windows(2) {
        let ((ta, fa), (tb, fb)) = (w[0], w[1]);
        if tb > ta {
            let skew = (fb - fa) as f64 / (tb - ta) as f64;
            for x in 1..=(tb - ta) {
                let tp = (ta + x) as f64;
                let fp = fa as f64 + skew * x as f64;
                if points.is_empty() {
                    points.push(PrPoint { recall: 0.0, precision: tp / (tp + fp) });
                }
                points.push(PrPoint { recall: tp / p, precision: tp / (tp + fp) });
            }
        } else if tb > 0 {
            points.push(PrPoint { recall: tb as f64 / p, precision: tb as f64 / (tb + fb) as f64 });
        }
    }
    if points.is_empty() {
        // no event is ever covered by an epoch
        points.push(PrPoint { recall: 0.0, precision: 0.0 });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].recall - w[0].recall) * 0.5 * (w[0].precision + w[1].precision))
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(PrCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn separable_scores_give_unit_auc() {
        let scores: Vec<f64> = (0..100).map(|i| if i < 10 { 0.9 + i as f64 * 0.001 } else { i as f64 * 0.001 }).collect();
        let events: Vec<Vec<usize>> = (0..10).map(|i| vec![i]).collect();
        let negatives: Vec<usize> = (10..100).collect();
        let c = pr_curve_events(&scores, &events, &negatives).unwrap();
        assert_eq!(c.auc, 1.0);
        assert!(c.points.iter().filter(|p| p.recall < 1.0).all(|p| p.precision == 1.0));
        assert!(c.points.windows(2).all(|w| w[0].recall <= w[1].recall));
    }

    #[test]
    fn random_scores_give_the_positive_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let pi = 0.2;
        let pos: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < pi).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let events: Vec<Vec<usize>> = (0..n).filter(|&i| pos[i]).map(|i| vec![i]).collect();
        let negatives: Vec<usize> = (0..n).filter(|&i| !pos[i]).collect();
        let rate = events.len() as f64 / n as f64;
        let c = pr_curve_events(&scores, &events, &negatives).unwrap();
        assert!((c.auc - rate).abs() < 0.02, "{} vs {rate}", c.auc);
    }

    #[test]
    fn interpolation_follows_true_positive_counts() {
        // tp 5 / fp 5 at 0.9, tp 10 / fp 15 at 0.5
        let mut scores = Vec::new();
        let mut events = Vec::new();
        for i in 0..10 {
            events.push(vec![scores.len()]);
            scores.push(if i < 5 { 0.9 } else { 0.5 });
        }
        let mut negatives = Vec::new();
        for i in 0..20 {
            negatives.push(scores.len());
            scores.push(if i < 5 { 0.9 } else if i < 15 { 0.5 } else { 0.1 });
        }
        let c = pr_curve_events(&scores, &events, &negatives).unwrap();
        let at = |r: f64| c.points.iter().find(|p| (p.recall - r).abs() < 1e-12).unwrap().precision;
        assert_eq!(at(0.5), 0.5);
        assert_eq!(at(0.6), 6.0 / 13.0);
        assert_eq!(at(0.8), 8.0 / 19.0);
        assert_eq!(at(1.0), 10.0 / 25.0);
        // final vertical drop at the lowest threshold
        assert_eq!(c.points.last().unwrap().precision, 10.0 / 30.0);
    }

    #[test]
    fn zero_positives_is_undefined() {
        assert!(matches!(pr_curve_events(&[0.1, 0.2], &[], &[0, 1]), Err(Error::UndefinedCurve(_))));
    }

    #[test]
    fn curve_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = 200;
            let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 10.0).round() / 10.0).collect();
            let events: Vec<Vec<usize>> = (0..10).map(|k| (k * 20..k * 20 + rng.random_range(0..4)).collect()).collect();
            let negatives: Vec<usize> = (0..n).filter(|i| i % 20 >= 4).collect();
            let c = pr_curve_events(&scores, &events, &negatives).unwrap();
            assert!((0.0..=1.0).contains(&c.auc));
            assert!(c.points.windows(2).all(|w| w[0].recall <= w[1].recall));
            assert!(c.points.iter().all(|p| (0.0..=1.0).contains(&p.precision) && (0.0..=1.0).contains(&p.recall)));
        }
    }
}
