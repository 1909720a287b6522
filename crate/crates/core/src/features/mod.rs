//! Modality-specific feature extractors. Every extractor returns a
//! [`FeatureSeries`] on the clock of its source channel, with missing samples
//! explicit as `None`.

mod accel;
mod ecg;
mod eeg;
mod eog;
mod gait;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::signalio::Placement;

pub use accel::{freeze_index, FreezeIndex, FI_LOCOMOTION, FI_TREMBLE, FI_WINDOW_S};
pub use ecg::{heart_rate, heart_rate_from_peaks, lead_heart_rate, pan_tompkins};
pub use eeg::{theta_power, ThetaParams};
pub use eog::{
    eog_velocity, estimate_turn_direction, merge_turn_directions, slow_phase_velocity,
    turning_phase, TurnDirection, SPV_LOWPASS_HZ, SPV_WAVELET_LEVEL,
};
pub(crate) use ecg::median_across;
pub(crate) use eeg::VOLTS_TO_MICROVOLTS;
pub(crate) use eog::{classify_slow_phase, directions_from_velocity, velocity_from_lowpassed};
pub use gait::{
    foot_contacts, stride_duration, strike_indices, FootswitchConfig, KeySwitchSet,
    SubjectSwitches, Thresholds,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    ThetaPower,
    Spv,
    HeartRate,
    FreezeIndex(Placement),
    StrideDuration,
}

impl FeatureKind {
    /// Column order used for epoch feature vectors.
    pub const ALL: [FeatureKind; 8] = [
        FeatureKind::ThetaPower,
        FeatureKind::Spv,
        FeatureKind::HeartRate,
        FeatureKind::FreezeIndex(Placement::LeftKnee),
        FeatureKind::FreezeIndex(Placement::RightKnee),
        FeatureKind::FreezeIndex(Placement::LeftAnkle),
        FeatureKind::FreezeIndex(Placement::RightAnkle),
        FeatureKind::StrideDuration,
    ];

    pub fn name(self) -> String {
        match self {
            FeatureKind::ThetaPower => "theta_power".into(),
            FeatureKind::Spv => "spv".into(),
            FeatureKind::HeartRate => "heart_rate".into(),
            FeatureKind::FreezeIndex(p) => format!("fi_{}", p.as_str()),
            FeatureKind::StrideDuration => "stride_duration".into(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn units(self) -> &'static str {
        match self {
            FeatureKind::ThetaPower => "uV^2",
            FeatureKind::Spv => "V/s",
            FeatureKind::HeartRate => "bpm",
            FeatureKind::FreezeIndex(_) => "ratio",
            FeatureKind::StrideDuration => "s",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    pub kind: FeatureKind,
    pub rate_hz: f64,
    pub values: Vec<Option<f64>>,
}

impl FeatureSeries {
    pub fn new(kind: FeatureKind, rate_hz: f64, values: Vec<Option<f64>>) -> Self {
        FeatureSeries {
            kind,
            rate_hz,
            values,
        }
    }

    pub fn missing(kind: FeatureKind, rate_hz: f64, n: usize) -> Self {
        Self::new(kind, rate_hz, vec![None; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.rate_hz
    }

    /// Nearest sample index for time `t_s`, clamped to the series.
    pub fn index_at(&self, t_s: f64) -> usize {
        ((t_s * self.rate_hz).round().max(0.0) as usize).min(self.len().saturating_sub(1))
    }
}

/// Median of a non-empty slice of finite values.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in FeatureKind::ALL {
            assert_eq!(FeatureKind::from_name(&k.name()), Some(k));
        }
        assert_eq!(FeatureKind::FreezeIndex(Placement::LeftKnee).name(), "fi_left_knee");
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [58.0, 90.0, 60.0]), 60.0);
        assert_eq!(median(&mut [1.0, 4.0, 2.0, 3.0]), 2.5);
    }
}
