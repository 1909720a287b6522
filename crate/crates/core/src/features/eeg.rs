use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureSeries};
use crate::dsp::{apply_filter, morlet_band_power, Band, FilterSpec, Phase};
use crate::error::{Error, Result};
use crate::signalio::Channel;

pub(crate) const VOLTS_TO_MICROVOLTS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaParams {
    pub prefilter_lo_hz: f64,
    pub prefilter_hi_hz: f64,
    pub prefilter_order: usize,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub n_freqs: usize,
    pub cycles: f64,
}

impl Default for ThetaParams {
    fn default() -> Self {
        ThetaParams {
            prefilter_lo_hz: 0.5,
            prefilter_hi_hz: 45.0,
            prefilter_order: 4,
            band_lo_hz: 4.0,
            band_hi_hz: 7.0,
            n_freqs: 20,
            cycles: 6.0,
        }
    }
}

impl ThetaParams {
    pub fn prefilter(&self, phase: Phase) -> FilterSpec {
        FilterSpec::bandpass(self.prefilter_lo_hz, self.prefilter_hi_hz, self.prefilter_order, phase)
    }

    pub fn band(&self) -> Band {
        Band::new(self.band_lo_hz, self.band_hi_hz)
    }
}

/// Theta-band power of the Fz - Cz derivation, in microvolts squared.
pub fn theta_power(fz: &Channel, cz: &Channel, params: &ThetaParams) -> Result<FeatureSeries> {
    if fz.samples.len() != cz.samples.len() || fz.rate_hz != cz.rate_hz {
        return Err(Error::Alignment(format!(
            "EEG channels `{}` ({} @ {} Hz) and `{}` ({} @ {} Hz) differ",
            fz.label,
            fz.samples.len(),
            fz.rate_hz,
            cz.label,
            cz.samples.len(),
            cz.rate_hz
        )));
    }
    let diff: Vec<f64> = fz
        .samples
        .iter()
        .zip(&cz.samples)
        .map(|(a, b)| (a - b) * VOLTS_TO_MICROVOLTS)
        .collect();
    let filtered = apply_filter(&diff, fz.rate_hz, &params.prefilter(Phase::ZeroPhase))?;
    let power = morlet_band_power(&filtered, fz.rate_hz, params.band(), params.n_freqs, params.cycles)?;
    Ok(FeatureSeries::new(
        FeatureKind::ThetaPower,
        fz.rate_hz,
        power.into_iter().map(Some).collect(),
    ))
}
