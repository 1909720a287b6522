use serde::{Deserialize, Serialize};

/// How continuous features are binned before entropy estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Discretizer {
    /// Quantile bins; tied values always share a bin.
    EqualFrequency { bins: usize },
    /// Supervised minimum-description-length cuts (Fayyad and Irani).
    Mdl,
}

impl Default for Discretizer {
    fn default() -> Self {
        Discretizer::EqualFrequency { bins: 10 }
    }
}

impl Discretizer {
    pub fn apply(&self, x: &[f64], labels: &[usize]) -> Vec<usize> {
        match *self {
            Discretizer::EqualFrequency { bins } => equal_frequency_bins(x, bins),
            Discretizer::Mdl => apply_cuts(x, &mdl_cut_points(x, labels)),
        }
    }
}

pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    if n == 0 || bins <= 1 {
        return vec![0; n];
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..bins).map(|j| sorted[(n * j / bins).min(n - 1)]).collect();
    cuts.dedup();
    x.iter().map(|&v| cuts.partition_point(|&c| c <= v)).collect()
}

pub fn apply_cuts(x: &[f64], cuts: &[f64]) -> Vec<usize> {
    x.iter().map(|&v| cuts.partition_point(|&c| c <= v)).collect()
}

fn entropy_of_counts(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
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

/// Recursive MDL cut points, sorted ascending. Each cut lies midway between
/// two adjacent distinct values.
pub fn mdl_cut_points(x: &[f64], labels: &[usize]) -> Vec<f64> {
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    let mut cuts = Vec::new();
    split(&xs, &ys, n_classes, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn split(xs: &[f64], ys: &[usize], n_classes: usize, cuts: &mut Vec<f64>) {
    let n = xs.len();
    if n < 2 {
        return;
    }
    let mut total = vec![0usize; n_classes];
    for &y in ys {
        total[y] += 1;
    }
    let ent = entropy_of_counts(&total, n);
    if ent == 0.0 {
        return;
    }

    let mut left = vec![0usize; n_classes];
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n - 1 {
        left[ys[i]] += 1;
        if xs[i] == xs[i + 1] {
            continue;
        }
        let nl = i + 1;
        let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
        let e = (nl as f64 * entropy_of_counts(&left, nl) + (n - nl) as f64 * entropy_of_counts(&right, n - nl))
            / n as f64;
        if best.is_none_or(|(b, _)| e < b) {
            best = Some((e, i));
        }
    }
    let Some((e_split, i)) = best else { return };

    let nl = i + 1;
    let count = |ys: &[usize]| {
        let mut c = vec![0usize; n_classes];
        for &y in ys {
            c[y] += 1;
        }
        c
    };
    let (cl, cr) = (count(&ys[..nl]), count(&ys[nl..]));
    let k = total.iter().filter(|&&c| c > 0).count() as f64;
    let k1 = cl.iter().filter(|&&c| c > 0).count() as f64;
    let k2 = cr.iter().filter(|&&c| c > 0).count() as f64;
    let (e1, e2) = (entropy_of_counts(&cl, nl), entropy_of_counts(&cr, n - nl));
    let gain = ent - e_split;
    let delta = (3f64.powf(k) - 2.0).log2() - (k * ent - k1 * e1 - k2 * e2);
    let nf = n as f64;
    if gain <= ((nf - 1.0).log2() + delta) / nf {
        return;
    }
    cuts.push(0.5 * (xs[i] + xs[i + 1]));
    split(&xs[..nl], &ys[..nl], n_classes, cuts);
    split(&xs[nl..], &ys[nl..], n_classes, cuts);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_frequency_balances_counts() {
        let x: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64).collect();
        let b = equal_frequency_bins(&x, 10);
        for bin in 0..10 {
            assert_eq!(b.iter().filter(|&&v| v == bin).count(), 100);
        }
    }

    #[test]
    fn ties_share_a_bin() {
        let x = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 3.0];
        let b = equal_frequency_bins(&x, 10);
        assert!(b[..4].iter().all(|&v| v == b[0]));
        assert!(b[6..].iter().all(|&v| v == b[6]));
        let c = equal_frequency_bins(&[5.0; 20], 10);
        assert!(c.iter().all(|&v| v == c[0]));
    }

    #[test]
    fn mdl_finds_the_class_boundary() {
        let x: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let y: Vec<usize> = (0..200).map(|i| usize::from(i >= 120)).collect();
        assert_eq!(mdl_cut_points(&x, &y), vec![119.5]);
    }

    #[test]
    fn mdl_rejects_uninformative_cuts() {
        let x: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let y: Vec<usize> = (0..200).map(|i| i % 2).collect();
        assert!(mdl_cut_points(&x, &y).is_empty());
    }
}
