//! RUSBoost epoch classifier over imputed, selected features.

mod dataset;
mod tree;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{Epoch, EpochDataset, EpochLabel, Imputer};
pub use tree::Tree;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const MIN_EPOCHS_PER_CLASS: usize = 10;
/// Extra attempts for a round whose weighted error reaches 0.5.
pub const MAX_ROUND_RETRIES: usize = 10;
const PERFECT_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    /// Majority rows kept per round, as a multiple of the minority count.
    /// Infinite means no undersampling (plain AdaBoost).
    #[serde(with = "ratio_serde")]
    pub undersample_ratio: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { n_rounds: 100, max_depth: 3, undersample_ratio: 1.0, seed: 0 }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::param("n_rounds", "must be at least 1"));
        }
        if self.max_depth == 0 || self.max_depth > 16 {
            return Err(Error::param("max_depth", "must be within [1, 16]"));
        }
        if self.undersample_ratio.is_nan() || self.undersample_ratio <= 0.0 {
            return Err(Error::param("undersample_ratio", "must be positive (or inf)"));
        }
        Ok(())
    }
}

/// Serde adapter for ratios that may be infinite, written as the string
/// `"inf"` since JSON has no infinity.
pub mod ratio_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// Weighted vote of depth-limited trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub learners: Vec<Tree>,
    pub learner_weights: Vec<f64>,
}

impl Ensemble {
    /// Weighted FOG vote over total weight, in `[0, 1]`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut fog = 0.0;
        let mut total = 0.0;
        for (t, &a) in self.learners.iter().zip(&self.learner_weights) {
            total += a;
            if t.predict(x) {
                fog += a;
            }
        }
        if total > 0.0 {
            fog / total
        } else {
            0.0
        }
    }

    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &BoostParams) -> Result<Self> {
        fit_observed(x, y, params, |_| {})
    }
}

fn sample_round(
    rng: &mut ChaCha8Rng,
    y: &[bool],
    d: &[f64],
    minority: bool,
    keep_majority: usize,
) -> Vec<usize> {
    let mut round: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority).collect();
    let majority: Vec<usize> = (0..y.len()).filter(|&i| y[i] != minority).collect();
    if keep_majority >= majority.len() {
        round.extend(majority);
    } else {
        // weighted sampling without replacement: keep the largest ln(u) / w
        let mut keyed: Vec<(f64, usize)> = majority
            .iter()
            .map(|&i| {
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let key = if d[i] > 0.0 { u.ln() / d[i] } else { f64::NEG_INFINITY };
                (key, i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        round.extend(keyed[..keep_majority].iter().map(|&(_, i)| i));
    }
    round.sort_unstable();
    round
}

fn fit_observed(
    x: &[Vec<f64>],
    y: &[bool],
    params: &BoostParams,
    mut observe: impl FnMut(&[f64]),
) -> Result<Ensemble> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(Error::Shape { expected: y.len(), got: x.len() });
    }
    let n_fog = y.iter().filter(|&&v| v).count();
    let n_normal = y.len() - n_fog;
    if n_fog == 0 || n_normal == 0 {
        return Err(Error::ClassCoverage(format!(
            "training data needs both classes, got {n_fog} FOG and {n_normal} NORMAL epochs"
        )));
    }
    if n_fog.min(n_normal) < MIN_EPOCHS_PER_CLASS {
        return Err(Error::SampleSize(format!(
            "need at least {MIN_EPOCHS_PER_CLASS} epochs per class, got {n_fog} FOG and {n_normal} NORMAL"
        )));
    }
    let minority = n_fog <= n_normal;
    let n_min = n_fog.min(n_normal);
    let keep_majority = if params.undersample_ratio.is_infinite() {
        usize::MAX
    } else {
        (params.undersample_ratio * n_min as f64).round().max(1.0) as usize
    };

    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut d = vec![1.0 / n as f64; n];
    let mut ens = Ensemble { learners: Vec::new(), learner_weights: Vec::new() };

    'rounds: for _ in 0..params.n_rounds {
        for _ in 0..=MAX_ROUND_RETRIES {
            let idx = sample_round(&mut rng, y, &d, minority, keep_majority);
            let tree = Tree::fit(x, y, &d, &idx, params.max_depth);
            let pred: Vec<bool> = x.iter().map(|xi| tree.predict(xi)).collect();
            let err: f64 = (0..n).filter(|&i| pred[i] != y[i]).map(|i| d[i]).sum();
            if err >= 0.5 {
                continue;
            }
            if err <= PERFECT_ERROR {
                ens.learners.push(tree);
                ens.learner_weights
                    .push(0.5 * ((1.0 - PERFECT_ERROR) / PERFECT_ERROR).ln());
                break 'rounds;
            }
            let alpha = 0.5 * ((1.0 - err) / err).ln();
            for i in 0..n {
                let agree = if pred[i] == y[i] { 1.0 } else { -1.0 };
                d[i] *= (-alpha * agree).exp();
            }
            let total: f64 = d.iter().sum();
            d.iter_mut().for_each(|v| *v /= total);
            observe(&d);
            ens.learners.push(tree);
            ens.learner_weights.push(alpha);
            continue 'rounds;
        }
        log::info!("boosting stopped early after {} rounds: no learner beat chance", ens.learners.len());
        break;
    }
    if ens.learners.is_empty() {
        return Err(Error::Validation("boosting produced no learner better than chance".into()));
    }
    Ok(ens)
}

/// Which filter variant produced the training features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    #[default]
    Offline,
    Causal,
}

/// Trained detector: column selection, imputation and the boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub format_version: u32,
    pub feature_mode: FeatureMode,
    /// Dataset columns the model was trained against.
    pub input_features: Vec<String>,
    pub selected_features: Vec<usize>,
    pub imputer: Imputer,
    pub params: BoostParams,
    pub ensemble: Ensemble,
}

impl DetectorModel {
    pub fn selected_names(&self) -> Vec<&str> {
        self.selected_features.iter().map(|&i| self.input_features[i].as_str()).collect()
    }

    fn row(&self, features: &[Option<f64>]) -> Vec<f64> {
        let picked: Vec<Option<f64>> = self.selected_features.iter().map(|&j| features[j]).collect();
        self.imputer.transform(&picked)
    }

    /// Score for one raw epoch feature vector.
    pub fn score_row(&self, features: &[Option<f64>]) -> Result<f64> {
        if features.len() != self.input_features.len() {
            return Err(Error::Shape { expected: self.input_features.len(), got: features.len() });
        }
        Ok(self.ensemble.score(&self.row(features)))
    }

    pub fn predict_scores(&self, data: &EpochDataset) -> Result<Vec<f64>> {
        if data.n_features() != self.input_features.len() {
            return Err(Error::Shape { expected: self.input_features.len(), got: data.n_features() });
        }
        Ok(data.epochs.iter().map(|e| self.ensemble.score(&self.row(&e.features))).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: DetectorModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        if m.selected_features.iter().any(|&j| j >= m.input_features.len())
            || m.imputer.medians.len() != m.selected_features.len()
        {
            return Err(Error::Validation("model feature indices are inconsistent".into()));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Trains on the `selected` columns of `data`, imputing with training medians.
pub fn train_rusboost(
    data: &EpochDataset,
    selected: &[usize],
    params: &BoostParams,
    mode: FeatureMode,
) -> Result<DetectorModel> {
    if selected.is_empty() {
        return Err(Error::param("selected", "at least one feature is required"));
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= data.n_features()) {
        return Err(Error::Shape { expected: data.n_features(), got: j + 1 });
    }
    let picked: Vec<Vec<Option<f64>>> = data
        .epochs
        .iter()
        .map(|e| selected.iter().map(|&j| e.features[j]).collect())
        .collect();
    let refs: Vec<&[Option<f64>]> = picked.iter().map(Vec::as_slice).collect();
    let imputer = Imputer::fit(&refs, selected.len());
    let x: Vec<Vec<f64>> = picked.iter().map(|r| imputer.transform(r)).collect();
    let y: Vec<bool> = data.epochs.iter().map(|e| e.label.is_fog()).collect();
    let ensemble = Ensemble::fit(&x, &y, params)?;
    Ok(DetectorModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_mode: mode,
        input_features: data.feature_names.clone(),
        selected_features: selected.to_vec(),
        imputer,
        params: params.clone(),
        ensemble,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_fog: usize, n_normal: usize, seed: u64) -> EpochDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = EpochDataset::new(vec!["a".into(), "b".into()], 2.56);
        for i in 0..n_fog + n_normal {
            let fog = i < n_fog;
            // separable by the line a + b = 0 with a margin
            let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let shift = if fog { 1.0 } else { -1.0 };
            let s = (a + b) / 2.0;
            let off = shift * (0.5 + s.abs()) - s;
            ds.epochs.push(Epoch {
                subject_id: "s".into(),
                start_s: i as f64 * 1.28,
                features: vec![Some(a + off), Some(b + off)],
                label: if fog { EpochLabel::Fog } else { EpochLabel::Normal },
            });
        }
        ds
    }

    fn mcc(pred: &[bool], truth: &[bool]) -> f64 {
        let (mut tp, mut tn, mut fp, mut fn_) = (0.0f64, 0.0, 0.0, 0.0);
        for (&p, &t) in pred.iter().zip(truth) {
            match (p, t) {
                (true, true) => tp += 1.0,
                (false, false) => tn += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
            }
        }
        let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        if den == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / den
        }
    }

    fn params(seed: u64) -> BoostParams {
        BoostParams { seed, ..BoostParams::default() }
    }

    #[test]
    fn separable_imbalanced_toy_is_learned() {
        let ds = toy(15, 300, 1);
        let m = train_rusboost(&ds, &[0, 1], &params(7), FeatureMode::Offline).unwrap();
        let scores = m.predict_scores(&ds).unwrap();
        let pred: Vec<bool> = scores.iter().map(|&s| s >= 0.5).collect();
        let truth: Vec<bool> = ds.epochs.iter().map(|e| e.label.is_fog()).collect();
        assert!(mcc(&pred, &truth) >= 0.95, "mcc {}", mcc(&pred, &truth));
        // a training FOG prototype scores high
        assert!(scores[0] > 0.9, "{}", scores[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy(15, 300, 2);
        let a = train_rusboost(&ds, &[0, 1], &params(3), FeatureMode::Offline).unwrap();
        let b = train_rusboost(&ds, &[0, 1], &params(3), FeatureMode::Offline).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ds = toy(15, 300, 3);
        let mut p = params(1);
        p.undersample_ratio = f64::INFINITY;
        let m = train_rusboost(&ds, &[0, 1], &p, FeatureMode::Causal).unwrap();
        let back = DetectorModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict_scores(&ds).unwrap(), m.predict_scores(&ds).unwrap());
    }

    #[test]
    fn single_class_is_rejected() {
        let mut ds = toy(20, 0, 4);
        assert!(matches!(
            train_rusboost(&ds, &[0], &params(0), FeatureMode::Offline),
            Err(Error::ClassCoverage(_))
        ));
        ds.epochs[0].label = EpochLabel::Normal;
        assert!(matches!(
            train_rusboost(&ds, &[0], &params(0), FeatureMode::Offline),
            Err(Error::SampleSize(_))
        ));
    }

    #[test]
    fn vote_definition_and_shape_check() {
        let m = DetectorModel {
            format_version: MODEL_FORMAT_VERSION,
            feature_mode: FeatureMode::Offline,
            input_features: vec!["a".into()],
            selected_features: vec![0],
            imputer: Imputer { medians: vec![0.0] },
            params: BoostParams::default(),
            ensemble: Ensemble { learners: vec![Tree::Leaf { fog: false }], learner_weights: vec![0.8] },
        };
        assert_eq!(m.score_row(&[Some(1.0)]).unwrap(), 0.0);
        assert!(matches!(m.score_row(&[Some(1.0), None]), Err(Error::Shape { expected: 1, got: 2 })));
        let ds = toy(10, 10, 0);
        assert!(matches!(m.predict_scores(&ds), Err(Error::Shape { .. })));
    }

    #[test]
    fn threshold_sets_are_nested() {
        let ds = toy(15, 200, 5);
        let m = train_rusboost(&ds, &[0], &params(2), FeatureMode::Offline).unwrap();
        let s = m.predict_scores(&ds).unwrap();
        for w in [0.1, 0.3, 0.5, 0.7, 0.9].windows(2) {
            let lo: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= w[0]).collect();
            assert!((0..s.len()).filter(|&i| s[i] >= w[1]).all(|i| lo.contains(&i)));
        }
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn boosting_weights_stay_a_distribution() {
        let ds = toy(20, 200, 6);
        let x: Vec<Vec<f64>> = ds.epochs.iter().map(|e| vec![e.features[0].unwrap()]).collect();
        let y: Vec<bool> = ds.epochs.iter().map(|e| e.label.is_fog()).collect();
        let mut checked = 0;
        fit_observed(&x, &y, &BoostParams { max_depth: 1, ..params(9) }, |d| {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(d.iter().all(|&v| v >= 0.0));
            checked += 1;
        })
        .unwrap();
        assert!(checked > 0);
    }

    #[test]
    fn zero_weight_learners_do_not_change_scores() {
        let ds = toy(15, 200, 7);
        let mut m = train_rusboost(&ds, &[0, 1], &params(4), FeatureMode::Offline).unwrap();
        let before = m.predict_scores(&ds).unwrap();
        m.ensemble.learners.push(Tree::Leaf { fog: true });
        m.ensemble.learner_weights.push(0.0);
        m.ensemble.learners.insert(0, Tree::Leaf { fog: false });
        m.ensemble.learner_weights.insert(0, 0.0);
        let after = m.predict_scores(&ds).unwrap();
        assert!(before.iter().zip(&after).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    /// Independent discrete AdaBoost with brute-force weighted-Gini stumps.
    fn adaboost_oracle(x: &[Vec<f64>], y: &[bool], rounds: usize) -> Vec<(usize, f64, bool, bool, f64)> {
        let n = x.len();
        let mut d = vec![1.0 / n as f64; n];
        let mut out = Vec::new();
        for _ in 0..rounds {
            let mut best: Option<(f64, usize, f64)> = None;
            for f in 0..x[0].len() {
                let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                for w in vals.windows(2) {
                    let thr = w[0] + 0.5 * (w[1] - w[0]);
                    let mut m = [[0.0; 2]; 2];
                    for i in 0..n {
                        m[usize::from(x[i][f] > thr)][usize::from(y[i])] += d[i];
                    }
                    let g = |a: f64, b: f64| if a + b > 0.0 { a + b - (a * a + b * b) / (a + b) } else { 0.0 };
                    let imp = g(m[0][0], m[0][1]) + g(m[1][0], m[1][1]);
                    if best.is_none_or(|(b, _, _)| imp < b - 1e-12) {
                        best = Some((imp, f, thr));
                    }
                }
            }
            let (_, f, thr) = best.unwrap();
            let side = |right: bool| {
                let (mut a, mut b) = (0.0, 0.0);
                for i in 0..n {
                    if (x[i][f] > thr) == right {
                        if y[i] { b += d[i] } else { a += d[i] }
                    }
                }
                b > a
            };
            let (lv, rv) = (side(false), side(true));
            let pred: Vec<bool> = x.iter().map(|r| if r[f] <= thr { lv } else { rv }).collect();
            let err: f64 = (0..n).filter(|&i| pred[i] != y[i]).map(|i| d[i]).sum();
            let alpha = 0.5 * ((1.0 - err) / err).ln();
            for i in 0..n {
                d[i] *= if pred[i] == y[i] { (-alpha).exp() } else { alpha.exp() };
            }
            let t: f64 = d.iter().sum();
            d.iter_mut().for_each(|v| *v /= t);
            out.push((f, thr, lv, rv, alpha));
        }
        out
    }

    #[test]
    fn without_undersampling_matches_plain_adaboost() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..50 {
            let fog = i % 2 == 0;
            let c = if fog { 0.6 } else { -0.6 };
            x.push(vec![c + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0) - c]);
            y.push(fog);
        }
        let p = BoostParams { n_rounds: 8, max_depth: 1, undersample_ratio: f64::INFINITY, seed: 5 };
        let ens = Ensemble::fit(&x, &y, &p).unwrap();
        let oracle = adaboost_oracle(&x, &y, ens.learners.len());
        for xi in &x {
            let mut fog = 0.0;
            let mut tot = 0.0;
            for &(f, thr, lv, rv, a) in &oracle {
                tot += a;
                if xi[f] <= thr && lv || xi[f] > thr && rv {
                    fog += a;
                }
            }
            assert!((ens.score(xi) - fog / tot).abs() < 1e-9);
        }
        // balanced data with ratio 1 keeps every row, so it is the same model
        let balanced = Ensemble::fit(&x, &y, &BoostParams { undersample_ratio: 1.0, ..p }).unwrap();
        assert_eq!(balanced, ens);
    }
}
