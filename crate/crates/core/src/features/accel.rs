//! Freeze index from a three-axis accelerometer.

use super::{FeatureKind, FeatureSeries};
use crate::dsp::{morlet_band_energy, Band};
use crate::error::{Error, Result};
use crate::signalio::{Channel, ChannelKind};

pub const FI_TREMBLE: Band = Band::new(3.0, 8.0);
pub const FI_LOCOMOTION: Band = Band::new(0.5, 3.0);
pub const FI_WINDOW_S: f64 = 2.0;
pub const FI_N_FREQS: usize = 20;
pub const FI_CYCLES: f64 = 6.0;
/// Locomotion power floor relative to total window power.
pub const FI_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FreezeIndex {
    pub series: FeatureSeries,
    /// Samples whose locomotion power fell below the floor; their value is
    /// `tremble / floor`.
    pub saturated: Vec<bool>,
}

/// Euclidean norm of the three axes with its mean removed.
pub(crate) fn centered_magnitude(x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    let mag: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
        .collect();
    let mean = mag.iter().sum::<f64>() / mag.len().max(1) as f64;
    mag.into_iter().map(|m| m - mean).collect()
}

/// Band energies of a magnitude trace: `(tremble, locomotion)` per sample.
pub(crate) fn band_energies(mag: &[f64], rate_hz: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((
        morlet_band_energy(mag, rate_hz, FI_TREMBLE, FI_N_FREQS, FI_CYCLES)?,
        morlet_band_energy(mag, rate_hz, FI_LOCOMOTION, FI_N_FREQS, FI_CYCLES)?,
    ))
}

/// Freeze index from window sums of tremble, locomotion and total power.
/// `None` when the window carries no power at all.
pub(crate) fn ratio(tremble: f64, locomotion: f64, total: f64) -> (Option<f64>, bool) {
    let eps = FI_FLOOR * total;
    if !(total > 0.0) {
        return (None, false);
    }
    if locomotion < eps {
        (Some(tremble / eps), true)
    } else {
        (Some(tremble / locomotion), false)
    }
}

/// Per-sample freeze index over a centered 2 s window of the acceleration
/// magnitude. The first and last second are missing.
pub fn freeze_index(axes: [&Channel; 3]) -> Result<FreezeIndex> {
    let [cx, cy, cz] = axes;
    let placement = match cx.kind {
        ChannelKind::Accel { placement, .. } => placement,
        _ => {
            return Err(Error::param(
                "accel",
                format!("channel `{}` is not an accelerometer", cx.label),
            ))
        }
    };
    let (n, rate) = (cx.samples.len(), cx.rate_hz);
    for c in [cy, cz] {
        if c.samples.len() != n || c.rate_hz != rate {
            return Err(Error::Alignment(format!(
                "accelerometer axes `{}` and `{}` differ in length or rate",
                cx.label, c.label
            )));
        }
    }
    let mag = centered_magnitude(&cx.samples, &cy.samples, &cz.samples);
    let (trem, loco) = band_energies(&mag, rate)?;
    let sq: Vec<f64> = mag.iter().map(|m| m * m).collect();
    let (ps_t, ps_l, ps_s) = (prefix(&trem), prefix(&loco), prefix(&sq));

    let half = (FI_WINDOW_S * rate / 2.0).round() as usize;
    let mut values = vec![None; n];
    let mut saturated = vec![false; n];
    if n > 2 * half {
        for i in half..n - half {
            let (a, b) = (i - half, i + half + 1);
            let (v, sat) = ratio(ps_t[b] - ps_t[a], ps_l[b] - ps_l[a], ps_s[b] - ps_s[a]);
            values[i] = v;
            saturated[i] = sat;
        }
    }
    Ok(FreezeIndex {
        series: FeatureSeries::new(FeatureKind::FreezeIndex(placement), rate, values),
        saturated,
    })
}

fn prefix(x: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(x.len() + 1);
    p.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        p.push(acc);
    }
    p
}
