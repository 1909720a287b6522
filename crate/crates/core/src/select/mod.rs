//! Symmetrical uncertainty and fast correlation-based filter selection.

mod discretize;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use discretize::{apply_cuts, equal_frequency_bins, mdl_cut_points, Discretizer};

/// Minimum series length for an SU estimate.
pub const MIN_SU_LEN: usize = 10;
pub const DEFAULT_SU_THRESHOLD: f64 = 0.85;

/// Entropy in bits of a sequence of category codes.
pub fn entropy(x: &[usize]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &v in x {
        *counts.entry(v).or_default() += 1;
    }
    entropy_from(counts.into_values().collect(), x.len())
}

/// Entropy from counts, summed in sorted order so that any permutation of
/// the same counts gives a bit-identical result.
fn entropy_from(mut counts: Vec<usize>, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    counts.sort_unstable();
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum()
}

fn joint_entropy(x: &[usize], y: &[usize]) -> f64 {
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *counts.entry((a, b)).or_default() += 1;
    }
    entropy_from(counts.into_values().collect(), x.len())
}

/// `2 IG(x; y) / (H(x) + H(y))` on discrete codes, in `[0, 1]`; zero when
/// either variable is constant.
pub fn symmetrical_uncertainty(x: &[usize], y: &[usize]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!(
            "SU inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < MIN_SU_LEN {
        return Err(Error::SampleSize(format!(
            "SU needs at least {MIN_SU_LEN} samples, got {}",
            x.len()
        )));
    }
    let (hx, hy) = (entropy(x), entropy(y));
    if hx == 0.0 || hy == 0.0 {
        return Ok(0.0);
    }
    let ig = hx + hy - joint_entropy(x, y);
    Ok((2.0 * ig / (hx + hy)).clamp(0.0, 1.0))
}

/// SU of a continuous series against discrete labels, after discretizing
/// `x` (equal-frequency 10 bins unless told otherwise).
pub fn symmetrical_uncertainty_continuous(x: &[f64], y: &[usize], disc: Discretizer) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!(
            "SU inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    symmetrical_uncertainty(&disc.apply(x, y), y)
}

/// Feature-class and feature-feature symmetrical uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct SuMatrix {
    pub su_class: Vec<f64>,
    pub su_pair: Vec<Vec<f64>>,
}

impl SuMatrix {
    /// Discretizes every feature once (supervised methods use `labels`) and
    /// fills both tables from the codes.
    pub fn compute(features: &[Vec<f64>], labels: &[usize], disc: Discretizer) -> Result<Self> {
        if let Some(f) = features.iter().find(|f| f.len() != labels.len()) {
            return Err(Error::Alignment(format!(
                "feature has {} values but there are {} labels",
                f.len(),
                labels.len()
            )));
        }
        let codes: Vec<Vec<usize>> = features.par_iter().map(|f| disc.apply(f, labels)).collect();
        let su_class = codes
            .iter()
            .map(|c| symmetrical_uncertainty(c, labels))
            .collect::<Result<Vec<_>>>()?;
        let k = features.len();
        let mut su_pair = vec![vec![1.0; k]; k];
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        let values = pairs
            .par_iter()
            .map(|&(i, j)| symmetrical_uncertainty(&codes[i], &codes[j]))
            .collect::<Result<Vec<_>>>()?;
        for (&(i, j), v) in pairs.iter().zip(values) {
            su_pair[i][j] = v;
            su_pair[j][i] = v;
        }
        Ok(SuMatrix { su_class, su_pair })
    }
}

/// Feature indices kept by FCBF, in descending order of class SU.
///
/// Candidates need `SU(f, class) > threshold`. Walking the ranking, each kept
/// feature removes every later candidate `f_j` with
/// `SU(f_i, f_j) >= SU(f_j, class)`.
pub fn fcbf(m: &SuMatrix, threshold: f64) -> Vec<usize> {
    let mut ranked: Vec<usize> = (0..m.su_class.len())
        .filter(|&i| m.su_class[i] > threshold)
        .collect();
    ranked.sort_by(|&a, &b| m.su_class[b].total_cmp(&m.su_class[a]).then(a.cmp(&b)));
    let mut removed = vec![false; ranked.len()];
    let mut kept = Vec::new();
    for p in 0..ranked.len() {
        if removed[p] {
            continue;
        }
        let i = ranked[p];
        kept.push(i);
        for q in p + 1..ranked.len() {
            let j = ranked[q];
            if !removed[q] && m.su_pair[i][j] >= m.su_class[j] {
                removed[q] = true;
            }
        }
    }
    kept
}

/// Selection outcome for one feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub names: Vec<String>,
    pub su: SuMatrix,
    pub selected: Vec<usize>,
    /// Set when no feature cleared the threshold and the redundancy pass
    /// ran over every feature with positive SU instead.
    pub relaxed: bool,
}

impl SelectionReport {
    pub fn run(
        names: Vec<String>,
        features: &[Vec<f64>],
        labels: &[usize],
        disc: Discretizer,
        threshold: f64,
    ) -> Result<Self> {
        let su = SuMatrix::compute(features, labels, disc)?;
        let mut selected = fcbf(&su, threshold);
        let relaxed = selected.is_empty() && threshold > 0.0;
        if relaxed {
            // A binary class over 10 equal-frequency bins cannot exceed SU
            // ~0.46, so strict thresholds can leave nothing to train on.
            selected = fcbf(&su, 0.0);
            log::warn!(
                "no feature has SU > {threshold} with the class; kept {} of {} by redundancy alone",
                selected.len(),
                names.len()
            );
        }
        Ok(SelectionReport { names, su, selected, relaxed })
    }

    pub fn selected_names(&self) -> Vec<String> {
        self.selected.iter().map(|&i| self.names[i].clone()).collect()
    }

    /// CSV with columns `feature, su_class, selected`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["feature", "su_class", "selected"])?;
        for (i, name) in self.names.iter().enumerate() {
            w.write_record([
                name.clone(),
                format!("{:?}", self.su.su_class[i]),
                self.selected.contains(&i).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
