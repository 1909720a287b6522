use std::path::Path;

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

use super::segments::Segment;

/// Largest turning-phase mismatch accepted when matching controls.
pub const PHASE_TOLERANCE_RAD: f64 = 0.1;
const Z95: f64 = 1.96;
const EXACT_MAX_N: usize = 20;
const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Two-sided Welch t-test. Needs at least two observations per group.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::SampleSize(format!(
            "t-test needs 2 observations per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let p = if ma == mb { 1.0 } else { 0.0 };
        let t = if ma == mb { 0.0 } else { (ma - mb).signum() * f64::INFINITY };
        return Ok(WelchResult { t, df: f64::NAN, p });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::param("df", e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchResult { t, df, p })
}

/// Mean and unbiased variance.
fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRow {
    pub relative_time_s: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub half_a: f64,
    pub mean_b: f64,
    pub half_b: f64,
    pub p: Option<f64>,
    pub p_bonferroni: Option<f64>,
}

impl BandRow {
    pub fn lo_a(&self) -> f64 {
        self.mean_a - self.half_a
    }
    pub fn hi_a(&self) -> f64 {
        self.mean_a + self.half_a
    }
    pub fn lo_b(&self) -> f64 {
        self.mean_b - self.half_b
    }
    pub fn hi_b(&self) -> f64 {
        self.mean_b + self.half_b
    }

    /// Whether the two 95% bands are disjoint.
    pub fn separated(&self) -> bool {
        self.p.is_some() && (self.lo_a() > self.hi_b() || self.lo_b() > self.hi_a())
    }
}

/// Per-sample group means, 95% bands (mean +- 1.96 SE) and Welch p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct TTestBand {
    pub rows: Vec<BandRow>,
}

impl TTestBand {
    /// Fraction of rows in `[t0, t1]` whose bands are disjoint.
    pub fn separated_fraction(&self, t0: f64, t1: f64) -> f64 {
        let tol = 1e-9;
        let rows: Vec<&BandRow> = self
            .rows
            .iter()
            .filter(|r| r.relative_time_s >= t0 - tol && r.relative_time_s <= t1 + tol)
            .collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().filter(|r| r.separated()).count() as f64 / rows.len() as f64
    }

    /// Fraction of rows in `[t0, t1]` where group A's mean is below B's.
    pub fn below_fraction(&self, t0: f64, t1: f64) -> f64 {
        let rows: Vec<&BandRow> = self
            .rows
            .iter()
            .filter(|r| r.relative_time_s >= t0 - 1e-9 && r.relative_time_s <= t1 + 1e-9)
            .collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().filter(|r| r.mean_a < r.mean_b).count() as f64 / rows.len() as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "relative_time_s",
            "mean_a",
            "lo_a",
            "hi_a",
            "mean_b",
            "lo_b",
            "hi_b",
            "p",
            "p_bonferroni",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_else(|| "NA".into());
        for r in &self.rows {
            w.write_record([
                format!("{:?}", r.relative_time_s),
                format!("{:?}", r.mean_a),
                format!("{:?}", r.lo_a()),
                format!("{:?}", r.hi_a()),
                format!("{:?}", r.mean_b),
                format!("{:?}", r.lo_b()),
                format!("{:?}", r.hi_b()),
                opt(r.p),
                opt(r.p_bonferroni),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Pointwise Welch t-test between two groups of segments on a shared grid.
/// Samples where either group has fewer than two defined values get no p.
pub fn pointwise_ttest(group_a: &[Segment], group_b: &[Segment]) -> Result<TTestBand> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(Error::SampleSize(format!(
            "need at least 2 segments per group, got {} and {}",
            group_a.len(),
            group_b.len()
        )));
    }
    let len = group_a[0].values.len();
    let rate = group_a[0].rate_hz;
    if group_a.iter().chain(group_b).any(|s| s.values.len() != len || s.rate_hz != rate) {
        return Err(Error::Alignment("segments are on different grids".into()));
    }
    let column = |g: &[Segment], i: usize| -> Vec<f64> { g.iter().filter_map(|s| s.values[i]).collect() };
    let summary = |x: &[f64]| -> (f64, f64) {
        match x.len() {
            0 => (f64::NAN, f64::NAN),
            1 => (x[0], f64::NAN),
            n => {
                let (m, v) = mean_var(x);
                (m, Z95 * (v / n as f64).sqrt())
            }
        }
    };
    let mut rows = Vec::with_capacity(len);
    for i in 0..len {
        let (a, b) = (column(group_a, i), column(group_b, i));
        let (mean_a, half_a) = summary(&a);
        let (mean_b, half_b) = summary(&b);
        let p = welch_ttest(&a, &b).ok().map(|r| r.p);
        rows.push(BandRow {
            relative_time_s: group_a[0].relative_time(i),
            n_a: a.len(),
            n_b: b.len(),
            mean_a,
            half_a,
            mean_b,
            half_b,
            p,
            p_bonferroni: None,
        });
    }
    let m = rows.iter().filter(|r| r.p.is_some()).count();
    for r in &mut rows {
        r.p_bonferroni = r.p.map(|p| (p * m as f64).min(1.0));
    }
    Ok(TTestBand { rows })
}

/// `min(1, p * m)` for each p-value.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < p_values.len() {
        return Err(Error::param(
            "m",
            format!("{m} comparisons but {} p-values", p_values.len()),
        ));
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}

/// Two-sided Wilcoxon signed-rank p-value for paired differences.
///
/// Zero differences are dropped. All-zero input returns 1 by convention;
/// fewer than five non-zero differences is an error. Up to twenty pairs the
/// exact null distribution (with tied ranks) is enumerated; beyond that a
/// normal approximation with tie and continuity corrections is used.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<f64> {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Ok(1.0);
    }
    if n < MIN_PAIRS {
        return Err(Error::InsufficientPairs {
            nonzero: n,
            required: MIN_PAIRS,
        });
    }
    let ranks = average_ranks(&nz.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    if n <= EXACT_MAX_N {
        // Ranks are multiples of 1/2, so doubled ranks are integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0f64; total + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let all = 2f64.powi(n as i32);
        let w2 = (2.0 * w_plus).round() as usize;
        let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
        let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
        return Ok((2.0 * lower.min(upper)).min(1.0));
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes(&nz.iter().map(|d| d.abs()).collect::<Vec<_>>())
        .iter()
        .map(|&t| (t * t * t - t) as f64)
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok((2.0 * normal.sf(z)).min(1.0))
}

/// 1-based ranks with ties sharing their average rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn tie_sizes(x: &[f64]) -> Vec<usize> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let j = s[i..].iter().take_while(|v| **v == s[i]).count();
        if j > 1 {
            out.push(j);
        }
        i += j;
    }
    out
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::characterize::Group;
    use crate::features::FeatureKind;

    fn seg(vals: Vec<f64>) -> Segment {
        Segment {
            group: Group::Freezing,
            kind: FeatureKind::Spv,
            subject_id: "S".into(),
            rate_hz: 1.0,
            anchor_s: 0.0,
            values: vals.into_iter().map(Some).collect(),
            constant: false,
        }
    }

    fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn noisy_group(rng: &mut ChaCha8Rng, level: f64, n: usize, len: usize) -> Vec<Segment> {
        (0..n)
            .map(|_| seg((0..len).map(|_| level + 1e-3 * rng.random_range(-1.0..1.0)).collect()))
            .collect()
    }

    #[test]
    fn identical_groups_have_p_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = noisy_group(&mut rng, 0.0, 10, 14);
        let band = pointwise_ttest(&g, &g).unwrap();
        assert!(band.rows.iter().all(|r| r.p == Some(1.0)));
        assert_eq!(band.rows[0].relative_time_s, -10.0);
        assert_eq!(band.rows[13].relative_time_s, 3.0);
    }

    #[test]
    fn distant_groups_are_highly_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = noisy_group(&mut rng, 0.0, 30, 14);
        let b = noisy_group(&mut rng, 5.0, 30, 14);
        let band = pointwise_ttest(&a, &b).unwrap();
        assert!(band.rows.iter().all(|r| r.p.unwrap() < 1e-6));
        assert_eq!(band.separated_fraction(-10.0, 3.0), 1.0);
    }

    #[test]
    fn half_width_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // 100 values rescaled to sample sd exactly 1
        let raw: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (m, v) = mean_var(&raw);
        let unit: Vec<f64> = raw.iter().map(|x| (x - m) / v.sqrt()).collect();
        let g: Vec<Segment> = unit.iter().map(|&x| seg(vec![x; 3])).collect();
        let band = pointwise_ttest(&g, &g).unwrap();
        for r in &band.rows {
            assert!((r.half_a - 0.196).abs() < 1e-6);
        }
    }

    #[test]
    fn welch_matches_reference_values() {
        // statistics from scipy.stats.ttest_ind(a, b, equal_var=False)
        let a = [19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0];
        let b = [28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0, 23.9, 21.6, 24.3, 20.4, 23.9, 13.3];
        let r = welch_ttest(&a, &b).unwrap();
        // independent recomputation of t and df
        let (ma, va) = mean_var(&a);
        let (mb, vb) = mean_var(&b);
        let t = (ma - mb) / (va / 10.0 + vb / 20.0).sqrt();
        assert!((r.t - t).abs() < 1e-12);
        assert!((r.t - (-2.225512039969852)).abs() < 1e-9, "{}", r.t);
        assert!((r.df - 24.524634944257343).abs() < 1e-9, "{}", r.df);
        assert!((r.p - 0.035484530830010325).abs() < 1e-9, "{}", r.p);
    }

    #[test]
    fn swap_negates_t_and_keeps_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a: Vec<f64> = (0..rng.random_range(2..20)).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..rng.random_range(2..20)).map(|_| rng.random_range(-1.0..4.0)).collect();
            let x = welch_ttest(&a, &b).unwrap();
            let y = welch_ttest(&b, &a).unwrap();
            assert_eq!(x.t, -y.t);
            assert_eq!(x.p, y.p);
        }
    }

    #[test]
    /// Holds when the groups' standard errors are comparable, which is the
    /// regime of equal-sized groups with a shared spread.
    fn disjoint_bands_imply_significance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut checked = 0;
        for _ in 0..400 {
            let n = rng.random_range(20..40);
            let shift: f64 = rng.random_range(0.0..2.0);
            let sd: f64 = rng.random_range(0.5..2.0);
            let a: Vec<Segment> = (0..n).map(|_| seg(vec![sd * sample_normal(&mut rng)])).collect();
            let b: Vec<Segment> = (0..n)
                .map(|_| seg(vec![shift + sd * sample_normal(&mut rng)]))
                .collect();
            let band = pointwise_ttest(&a, &b).unwrap();
            let r = band.rows[0];
            if r.separated() {
                checked += 1;
                assert!(r.p.unwrap() < 0.05, "{r:?}");
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn too_few_segments() {
        let g = vec![seg(vec![1.0])];
        assert!(matches!(pointwise_ttest(&g, &g), Err(Error::SampleSize(_))));
    }

    #[test]
    fn wilcoxon_all_positive_six() {
        let p = wilcoxon_signed_rank(&[0.1, 0.4, 0.2, 0.9, 0.3, 0.7]).unwrap();
        assert!((p - 2.0 / 64.0).abs() < 1e-15);
        let p = wilcoxon_signed_rank(&[-0.1, -0.4, -0.2, -0.9, -0.3, -0.7]).unwrap();
        assert!((p - 2.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let n = rng.random_range(5..12);
            let d: Vec<f64> = (0..n).map(|_| (rng.random_range(-4i32..5) as f64) * 0.5).filter(|v| *v != 0.0).collect();
            if d.len() < 5 {
                continue;
            }
            let ranks = average_ranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
            let w: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
            let m = d.len();
            let (mut le, mut ge) = (0usize, 0usize);
            for mask in 0..(1u32 << m) {
                let s: f64 = (0..m).filter(|&i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
                if s <= w + 1e-9 {
                    le += 1;
                }
                if s >= w - 1e-9 {
                    ge += 1;
                }
            }
            let want = (2.0 * le.min(ge) as f64 / (1u64 << m) as f64).min(1.0);
            assert!((wilcoxon_signed_rank(&d).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn wilcoxon_antisymmetric_is_one() {
        assert_eq!(wilcoxon_signed_rank(&[1.0, -1.0, 2.0, -2.0, 3.0, -3.0]).unwrap(), 1.0);
        let big: Vec<f64> = (1..=15).flat_map(|k| [k as f64, -(k as f64)]).collect();
        assert_eq!(wilcoxon_signed_rank(&big).unwrap(), 1.0);
    }

    #[test]
    fn wilcoxon_zero_and_small_cases() {
        assert_eq!(wilcoxon_signed_rank(&[0.0; 8]).unwrap(), 1.0);
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0, 0.0, 3.0]),
            Err(Error::InsufficientPairs { nonzero: 3, required: 5 })
        ));
    }

    #[test]
    fn wilcoxon_normal_approximation_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..3 {
            let d: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>();
            let p = wilcoxon_signed_rank(&d).unwrap();
            let ranks = average_ranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
            let w: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
            let center = 30.0 * 31.0 / 4.0;
            let trials = 200_000;
            let extreme = (0..trials)
                .filter(|_| {
                    let s: f64 = ranks.iter().filter(|_| rng.random::<bool>()).sum();
                    (s - center).abs() >= (w - center).abs() - 1e-9
                })
                .count();
            let mc = extreme as f64 / trials as f64;
            assert!((p - mc).abs() < 0.01, "approx {p} vs monte carlo {mc}");
        }
    }

    #[test]
    fn bonferroni_rules() {
        assert!((bonferroni(&[0.01], 5).unwrap()[0] - 0.05).abs() < 1e-15);
        assert_eq!(bonferroni(&[0.5], 5).unwrap(), vec![1.0]);
        let ps = [0.001, 0.2, 0.03, 0.6];
        let v = bonferroni(&ps, 4).unwrap();
        for (p, q) in ps.iter().zip(&v) {
            assert_eq!(*q, bonferroni(&[*p], 4).unwrap()[0]);
        }
        assert!(bonferroni(&ps, 3).is_err());
    }
}
