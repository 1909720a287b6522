//! Horizontal EOG slow-phase velocity.
//!
//! The slow/quick phase split adapts the Cluster Fix idea: two-cluster k-means
//! on normalized absolute velocity and acceleration, with the slower cluster
//! taken as the slow phase.

use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureSeries};
use crate::dsp::{
    apply_filter, hilbert_phase, kmeans, median_filter, sliding_median, wavelet_baseline_remove,
    FilterSpec, Phase,
};
use crate::error::{Error, Result};
use crate::signalio::Channel;

pub const SPV_LOWPASS_HZ: f64 = 30.0;
pub const SPV_MEDIAN_MS: f64 = 50.0;
pub const SPV_WAVELET_LEVEL: u32 = 10;
/// Samples faster than this velocity quantile are treated as blinks.
pub const BLINK_QUANTILE: f64 = 0.995;
pub const TURN_WINDOW_S: f64 = 2.0;
/// Seeded k-means runs per classification; the lowest inertia wins.
pub const KMEANS_RESTARTS: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnDirection {
    Clockwise,
    Counterclockwise,
}

/// Preprocessed horizontal EOG velocity in signal units per second: 30 Hz
/// low-pass, 50 ms median, level-10 wavelet baseline removal, then a central
/// difference.
pub fn eog_velocity(eog_h: &Channel) -> Result<Vec<f64>> {
    let x = &eog_h.samples;
    let min_len = 1usize << SPV_WAVELET_LEVEL;
    if x.len() < min_len {
        return Err(Error::param(
            "eog_h",
            format!("{} samples, need at least {min_len}", x.len()),
        ));
    }
    let rate = eog_h.rate_hz;
    let lp = apply_filter(x, rate, &FilterSpec::lowpass(SPV_LOWPASS_HZ, 4, Phase::ZeroPhase))?;
    velocity_from_lowpassed(&lp, rate)
}

/// The steps of [`eog_velocity`] after the low-pass.
pub(crate) fn velocity_from_lowpassed(lp: &[f64], rate_hz: f64) -> Result<Vec<f64>> {
    let med = median_filter(lp, rate_hz, SPV_MEDIAN_MS);
    let clean = wavelet_baseline_remove(&med, SPV_WAVELET_LEVEL)?;
    Ok(central_difference(&clean, rate_hz))
}

pub(crate) fn central_difference(x: &[f64], rate_hz: f64) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| match i {
            0 => (x[1] - x[0]) * rate_hz,
            i if i == n - 1 => (x[n - 1] - x[n - 2]) * rate_hz,
            i => (x[i + 1] - x[i - 1]) * 0.5 * rate_hz,
        })
        .collect()
}

pub fn slow_phase_velocity(eog_h: &Channel, seed: u64) -> Result<FeatureSeries> {
    let v = eog_velocity(eog_h)?;
    let slow = classify_slow_phase(&v, eog_h.rate_hz, seed)?;
    let values = v
        .iter()
        .zip(&slow)
        .map(|(&vel, &is_slow)| is_slow.then_some(vel))
        .collect();
    Ok(FeatureSeries::new(FeatureKind::Spv, eog_h.rate_hz, values))
}

/// Marks slow-phase samples of a velocity trace.
pub(crate) fn classify_slow_phase(v: &[f64], rate_hz: f64, seed: u64) -> Result<Vec<bool>> {
    let n = v.len();
    if n < 2 {
        return Ok(vec![false; n]);
    }
    let speed: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let accel: Vec<f64> = central_difference(v, rate_hz).iter().map(|x| x.abs()).collect();

    let mut sorted = speed.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[((n - 1) as f64 * BLINK_QUANTILE).round() as usize];
    let kept: Vec<usize> = (0..n).filter(|&i| speed[i] <= cut).collect();

    // Min-max scaling as in Cluster Fix; z-scores let the heavy acceleration
    // tail outweigh speed.
    let scale = |vals: &[f64]| -> (f64, f64) {
        let lo = kept.iter().map(|&i| vals[i]).fold(f64::INFINITY, f64::min);
        let hi = kept.iter().map(|&i| vals[i]).fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let (ms, ss) = scale(&speed);
    let (ma, sa) = scale(&accel);
    let points: Vec<Vec<f64>> = kept
        .iter()
        .map(|&i| vec![(speed[i] - ms) / ss, (accel[i] - ma) / sa])
        .collect();
    let k = if points.len() >= 2 { 2 } else { 1 };
    let mut fit = kmeans(&points, k, seed)?;
    for r in 1..KMEANS_RESTARTS {
        let alt = kmeans(&points, k, seed.wrapping_add(r))?;
        if alt.inertia < fit.inertia {
            fit = alt;
        }
    }

    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (&i, &c) in kept.iter().zip(&fit.assignments) {
        sums[c] += speed[i];
        counts[c] += 1;
    }
    let mean = |c: usize| {
        if counts[c] == 0 {
            f64::INFINITY
        } else {
            sums[c] / counts[c] as f64
        }
    };
    let slow_cluster = if k == 2 && mean(1) < mean(0) { 1 } else { 0 };

    let mut slow = vec![false; n];
    for (&i, &c) in kept.iter().zip(&fit.assignments) {
        slow[i] = c == slow_cluster;
    }
    Ok(slow)
}

/// Per-sample turn direction from the sign of the median EOG velocity over a
/// centered 2 s window. Positive (or zero) median velocity is clockwise.
pub fn estimate_turn_direction(eog_h: &Channel) -> Result<Vec<TurnDirection>> {
    let v = eog_velocity(eog_h)?;
    Ok(directions_from_velocity(&v, eog_h.rate_hz))
}

pub(crate) fn directions_from_velocity(v: &[f64], rate_hz: f64) -> Vec<TurnDirection> {
    let half = (TURN_WINDOW_S * rate_hz / 2.0).round() as usize;
    sliding_median(v, half)
        .into_iter()
        .map(|m| {
            if m >= 0.0 {
                TurnDirection::Clockwise
            } else {
                TurnDirection::Counterclockwise
            }
        })
        .collect()
}

/// Negates SPV during counterclockwise turns so both directions share a sign.
pub fn merge_turn_directions(spv: &FeatureSeries, directions: &[TurnDirection]) -> Result<FeatureSeries> {
    if spv.len() != directions.len() {
        return Err(Error::Alignment(format!(
            "SPV has {} samples but direction series has {}",
            spv.len(),
            directions.len()
        )));
    }
    let values = spv
        .values
        .iter()
        .zip(directions)
        .map(|(v, d)| match d {
            TurnDirection::Clockwise => *v,
            TurnDirection::Counterclockwise => v.map(|x| -x),
        })
        .collect();
    Ok(FeatureSeries::new(spv.kind, spv.rate_hz, values))
}

/// Cutoff for smoothing the gap-filled SPV before taking its phase.
pub const TURN_PHASE_LOWPASS_HZ: f64 = 1.0;

/// Instantaneous phase of the turning oscillation carried by the signed
/// (unmerged) SPV. Quick-phase gaps are filled by linear interpolation and the
/// result low-passed before the Hilbert transform.
pub fn turning_phase(spv: &FeatureSeries) -> Result<Vec<f64>> {
    let filled = interpolate_gaps(&spv.values).ok_or(Error::DegenerateAmplitude)?;
    let mean = filled.iter().sum::<f64>() / filled.len() as f64;
    let centered: Vec<f64> = filled.iter().map(|v| v - mean).collect();
    let smooth = apply_filter(
        &centered,
        spv.rate_hz,
        &FilterSpec::lowpass(TURN_PHASE_LOWPASS_HZ, 2, Phase::ZeroPhase),
    )?;
    hilbert_phase(&smooth)
}

/// Linear interpolation across `None` runs; leading and trailing runs hold
/// the nearest defined value. `None` if nothing is defined.
pub(crate) fn interpolate_gaps(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let defined: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .collect();
    let (&(first_i, first_v), &(last_i, last_v)) = (defined.first()?, defined.last()?);
    let mut out = vec![0.0; values.len()];
    out[..=first_i].iter_mut().for_each(|o| *o = first_v);
    out[last_i..].iter_mut().for_each(|o| *o = last_v);
    for w in defined.windows(2) {
        let ((i0, v0), (i1, v1)) = (w[0], w[1]);
        for (j, o) in out.iter_mut().enumerate().take(i1 + 1).skip(i0) {
            let f = (j - i0) as f64 / (i1 - i0) as f64;
            *o = v0 + f * (v1 - v0);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalio::{ChannelKind, EogAxis};

    const RATE: f64 = 500.0;

    fn eog(samples: Vec<f64>) -> Channel {
        Channel::new(
            "EOG-H",
            ChannelKind::Eog {
                axis: EogAxis::Horizontal,
            },
            RATE,
            samples,
        )
        .unwrap()
    }

    /// Slow ramp at `slope` per second for `slow_s`, then a linear reset over
    /// `reset_s`.
    fn sawtooth(slope: f64, slow_s: f64, reset_s: f64, secs: f64) -> Vec<f64> {
        let period = slow_s + reset_s;
        let amp = slope * slow_s;
        (0..(secs * RATE) as usize)
            .map(|i| {
                let t = (i as f64 / RATE) % period;
                if t < slow_s {
                    slope * t
                } else {
                    amp * (1.0 - (t - slow_s) / reset_s)
                }
            })
            .collect()
    }

    fn median_defined(s: &FeatureSeries) -> f64 {
        let mut vals: Vec<f64> = s.values.iter().flatten().copied().collect();
        crate::features::median(&mut vals)
    }

    #[test]
    fn sawtooth_slow_phase_velocity_recovered() {
        let v = 2e-3;
        let s = slow_phase_velocity(&eog(sawtooth(v, 1.0, 0.04, 30.0)), 7).unwrap();
        let m = median_defined(&s);
        assert!((m / v - 1.0).abs() < 0.10, "median SPV {m}");
        // quick phases are excluded
        let frac = s.defined_count() as f64 / s.len() as f64;
        assert!(frac > 0.7 && frac < 0.99, "{frac}");
    }

    #[test]
    fn constant_signal_has_zero_spv() {
        let s = slow_phase_velocity(&eog(vec![3e-4; 4000]), 1).unwrap();
        assert!(s.defined_count() > 0);
        assert!(s.values.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mirrored_sawtooth_flips_sign_exactly() {
        let x = sawtooth(1e-3, 1.5, 0.05, 20.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = slow_phase_velocity(&eog(x), 3).unwrap();
        let b = slow_phase_velocity(&eog(neg), 3).unwrap();
        for (p, q) in a.values.iter().zip(&b.values) {
            assert_eq!(*p, q.map(|v| -v));
        }
    }

    #[test]
    fn retained_samples_equal_raw_velocity() {
        let ch = eog(sawtooth(1e-3, 1.0, 0.03, 12.0));
        let v = eog_velocity(&ch).unwrap();
        let s = slow_phase_velocity(&ch, 5).unwrap();
        for (spv, raw) in s.values.iter().zip(&v) {
            if let Some(x) = spv {
                assert_eq!(x, raw);
            }
        }
    }

    #[test]
    fn too_short_rejected() {
        assert!(slow_phase_velocity(&eog(vec![0.0; 1000]), 0).is_err());
    }

    #[test]
    fn merge_identity_negation_and_blocks() {
        let spv = FeatureSeries::new(
            FeatureKind::Spv,
            RATE,
            vec![Some(1.0), None, Some(-2.0), Some(3.0), Some(4.0), None],
        );
        let cw = vec![TurnDirection::Clockwise; 6];
        assert_eq!(merge_turn_directions(&spv, &cw).unwrap(), spv);
        let ccw = vec![TurnDirection::Counterclockwise; 6];
        let neg = merge_turn_directions(&spv, &ccw).unwrap();
        assert_eq!(neg.values, vec![Some(-1.0), None, Some(2.0), Some(-3.0), Some(-4.0), None]);

        let blocks: Vec<TurnDirection> = (0..6)
            .map(|i| if (i / 2) % 2 == 0 { TurnDirection::Clockwise } else { TurnDirection::Counterclockwise })
            .collect();
        let merged = merge_turn_directions(&spv, &blocks).unwrap();
        for i in 0..6 {
            let sign = if blocks[i] == TurnDirection::Clockwise { 1.0 } else { -1.0 };
            assert_eq!(merged.values[i], spv.values[i].map(|v| v * sign));
        }
        assert!(merge_turn_directions(&spv, &cw[..5]).is_err());
    }

    #[test]
    fn direction_follows_velocity_sign() {
        let v: Vec<f64> = (0..4000).map(|i| if i < 2000 { 1.0 } else { -1.0 }).collect();
        let d = directions_from_velocity(&v, RATE);
        assert_eq!(d[100], TurnDirection::Clockwise);
        assert_eq!(d[3900], TurnDirection::Counterclockwise);
    }

    #[test]
    fn gap_interpolation() {
        let filled = interpolate_gaps(&[None, Some(1.0), None, None, Some(4.0), None]).unwrap();
        assert_eq!(filled, vec![1.0, 1.0, 2.0, 3.0, 4.0, 4.0]);
        assert!(interpolate_gaps(&[None, None]).is_none());
    }
}
