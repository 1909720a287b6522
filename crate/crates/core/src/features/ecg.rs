//! Pan-Tompkins R-peak detection and per-sample heart rate.

use super::{median, FeatureKind, FeatureSeries};
use crate::dsp::{apply_filter, wavelet_baseline_remove, FilterSpec, Phase};
use crate::error::{Error, Result};
use crate::signalio::Channel;

pub const ECG_WAVELET_LEVEL: u32 = 9;
const QRS_BAND_HZ: (f64, f64) = (5.0, 15.0);
const INTEGRATION_S: f64 = 0.150;
const REFRACTORY_S: f64 = 0.200;
const T_WAVE_S: f64 = 0.360;
const LEARNING_S: f64 = 2.0;
const SEARCHBACK_FACTOR: f64 = 1.66;
const LOCATE_S: f64 = 0.075;
/// Valid heart rates are strictly inside this range.
pub const HR_RANGE_BPM: (f64, f64) = (20.0, 250.0);

/// R-peak sample indices in `x` (a baseline-free ECG trace).
///
/// Band-pass 5-15 Hz, five-point derivative, squaring and a 150 ms moving
/// integration, followed by the adaptive signal/noise thresholds with
/// refractory period, T-wave discrimination and searchback. Filters are
/// zero-phase and the integrator is centered, so no delay compensation is
/// needed.
pub fn pan_tompkins(x: &[f64], rate_hz: f64) -> Result<Vec<usize>> {
    let n = x.len();
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n < 16 || !(hi - lo > 0.0) {
        return Ok(Vec::new());
    }
    let band = apply_filter(
        x,
        rate_hz,
        &FilterSpec::bandpass(QRS_BAND_HZ.0, QRS_BAND_HZ.1, 2, Phase::ZeroPhase),
    )?;
    let deriv: Vec<f64> = (0..n)
        .map(|i| {
            let at = |k: isize| band[(i as isize + k).clamp(0, n as isize - 1) as usize];
            (2.0 * at(1) + at(2) - at(-2) - 2.0 * at(-1)) * rate_hz / 8.0
        })
        .collect();
    let squared: Vec<f64> = deriv.iter().map(|d| d * d).collect();
    let mwi = centered_mean(&squared, ((INTEGRATION_S * rate_hz).round() as usize).max(1));

    let refractory = (REFRACTORY_S * rate_hz).round() as usize;
    let t_wave = (T_WAVE_S * rate_hz).round() as usize;
    let locate = (LOCATE_S * rate_hz).round() as usize;

    let learn = ((LEARNING_S * rate_hz) as usize).min(n);
    let learn_max = mwi[..learn].iter().copied().fold(0.0, f64::max);
    let learn_mean = mwi[..learn].iter().sum::<f64>() / learn as f64;
    let mut spki = 0.25 * learn_max;
    let mut npki = 0.5 * learn_mean;
    let threshold = |spki: f64, npki: f64| npki + 0.25 * (spki - npki);

    let candidates: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1])
        .collect();

    let slope_at = |p: usize| {
        let a = p.saturating_sub(locate);
        let b = (p + locate).min(n - 1);
        deriv[a..=b].iter().fold(0.0f64, |m, d| m.max(d.abs()))
    };

    let mut qrs: Vec<usize> = Vec::new();
    let mut rr_recent: Vec<usize> = Vec::new();
    let mut skipped: Vec<usize> = Vec::new(); // noise peaks since the last QRS
    for &p in &candidates {
        let peak = mwi[p];
        let thr1 = threshold(spki, npki);

        if let Some(&last) = qrs.last() {
            // Searchback: a long silence suggests a missed beat.
            if !rr_recent.is_empty() {
                let rr_avg = rr_recent.iter().sum::<usize>() as f64 / rr_recent.len() as f64;
                if (p - last) as f64 > SEARCHBACK_FACTOR * rr_avg {
                    let thr2 = 0.5 * thr1;
                    if let Some(&best) = skipped
                        .iter()
                        .filter(|&&s| s > last + refractory && mwi[s] > thr2)
                        .max_by(|&&a, &&b| mwi[a].total_cmp(&mwi[b]))
                    {
                        spki = 0.25 * mwi[best] + 0.75 * spki;
                        push_rr(&mut rr_recent, best - last);
                        qrs.push(best);
                        skipped.clear();
                    }
                }
            }
        }

        if peak <= thr1 {
            npki = 0.125 * peak + 0.875 * npki;
            skipped.push(p);
            continue;
        }
        match qrs.last().copied() {
            Some(last) if p - last < refractory => {
                if peak > mwi[last] {
                    *qrs.last_mut().unwrap() = p;
                }
            }
            Some(last) if p - last < t_wave && slope_at(p) < 0.5 * slope_at(last) => {
                npki = 0.125 * peak + 0.875 * npki;
                skipped.push(p);
            }
            last => {
                spki = 0.125 * peak + 0.875 * spki;
                if let Some(last) = last {
                    push_rr(&mut rr_recent, p - last);
                }
                qrs.push(p);
                skipped.clear();
            }
        }
    }

    // Refine each detection to the largest band-passed excursion nearby.
    let mut peaks: Vec<usize> = qrs
        .iter()
        .map(|&p| {
            let a = p.saturating_sub(locate);
            let b = (p + locate).min(n - 1);
            (a..=b).max_by(|&i, &j| band[i].abs().total_cmp(&band[j].abs())).unwrap()
        })
        .collect();
    peaks.dedup();
    Ok(peaks)
}

fn push_rr(rr: &mut Vec<usize>, v: usize) {
    rr.push(v);
    if rr.len() > 8 {
        rr.remove(0);
    }
}

fn centered_mean(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    let before = width / 2;
    let after = width - 1 - before;
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(before);
            let b = (i + after + 1).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

/// Zero-order hold of `60 / RR` between successive peaks. Samples outside the
/// first and last peak, and intervals whose rate falls outside
/// [`HR_RANGE_BPM`], are missing.
pub fn heart_rate_from_peaks(peaks: &[usize], n: usize, rate_hz: f64) -> Vec<Option<f64>> {
    let mut out = vec![None; n];
    for w in peaks.windows(2) {
        let rr = (w[1] - w[0]) as f64 / rate_hz;
        let bpm = 60.0 / rr;
        if bpm > HR_RANGE_BPM.0 && bpm < HR_RANGE_BPM.1 {
            out[w[0]..w[1].min(n)].iter_mut().for_each(|o| *o = Some(bpm));
        }
    }
    out
}

/// Heart rate from one lead: baseline removal then Pan-Tompkins.
pub fn lead_heart_rate(lead: &Channel) -> Result<Vec<Option<f64>>> {
    let n = lead.samples.len();
    if n < (1 << ECG_WAVELET_LEVEL) || is_flat(&lead.samples) {
        return Ok(vec![None; n]);
    }
    let clean = wavelet_baseline_remove(&lead.samples, ECG_WAVELET_LEVEL)?;
    let peaks = pan_tompkins(&clean, lead.rate_hz)?;
    Ok(heart_rate_from_peaks(&peaks, n, lead.rate_hz))
}

/// Constant to within rounding of its own magnitude.
fn is_flat(x: &[f64]) -> bool {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo <= 64.0 * f64::EPSILON * lo.abs().max(hi.abs())
}

/// Per-sample median heart rate across leads, in beats per minute.
pub fn heart_rate(leads: &[&Channel]) -> Result<FeatureSeries> {
    let first = leads
        .first()
        .ok_or_else(|| Error::param("ecg_leads", "at least one lead required"))?;
    let (n, rate) = (first.samples.len(), first.rate_hz);
    if let Some(bad) = leads.iter().find(|l| l.samples.len() != n || l.rate_hz != rate) {
        return Err(Error::Alignment(format!(
            "ECG lead `{}` is not aligned with `{}`",
            bad.label, first.label
        )));
    }
    let per_lead: Vec<Vec<Option<f64>>> = leads.iter().map(|l| lead_heart_rate(l)).collect::<Result<_>>()?;
    Ok(FeatureSeries::new(
        FeatureKind::HeartRate,
        rate,
        median_across(&per_lead, n),
    ))
}

pub(crate) fn median_across(per_lead: &[Vec<Option<f64>>], n: usize) -> Vec<Option<f64>> {
    let mut buf = Vec::with_capacity(per_lead.len());
    (0..n)
        .map(|i| {
            buf.clear();
            buf.extend(per_lead.iter().filter_map(|l| l[i]));
            (!buf.is_empty()).then(|| median(&mut buf))
        })
        .collect()
}
