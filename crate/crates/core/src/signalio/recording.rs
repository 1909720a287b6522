use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EogAxis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl Placement {
    pub const ALL: [Placement; 4] = [
        Placement::LeftKnee,
        Placement::RightKnee,
        Placement::LeftAnkle,
        Placement::RightAnkle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Placement::LeftKnee => "left_knee",
            Placement::RightKnee => "right_knee",
            Placement::LeftAnkle => "left_ankle",
            Placement::RightAnkle => "right_ankle",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub fn as_str(self) -> &'static str {
        match self {
            Foot::Left => "left",
            Foot::Right => "right",
        }
    }
}

/// What a channel measures. Serialized flattened into the sidecar entry,
/// tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelKind {
    Eeg { electrode: String },
    Eog { axis: EogAxis },
    Ecg { lead: String },
    Accel { placement: Placement, axis: Axis },
    Footswitch { foot: Foot, switch_index: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub label: String,
    pub kind: ChannelKind,
    pub rate_hz: f64,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn new(
        label: impl Into<String>,
        kind: ChannelKind,
        rate_hz: f64,
        samples: Vec<f64>,
    ) -> Result<Self> {
        let ch = Channel {
            label: label.into(),
            kind,
            rate_hz,
            samples,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "channel `{}` has invalid rate {} Hz",
                self.label, self.rate_hz
            )));
        }
        if let Some(index) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                channel: self.label.clone(),
                index,
            });
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }
}

/// A multi-channel, possibly multi-rate recording of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub channels: Vec<Channel>,
    pub duration_s: f64,
}

impl Recording {
    pub fn new(subject_id: impl Into<String>, channels: Vec<Channel>, duration_s: f64) -> Result<Self> {
        let rec = Recording {
            subject_id: subject_id.into(),
            channels,
            duration_s,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Validation(format!(
                "recording `{}` has invalid duration {}",
                self.subject_id, self.duration_s
            )));
        }
        let mut seen = HashSet::new();
        for ch in &self.channels {
            if !seen.insert(ch.label.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate channel label `{}` in recording `{}`",
                    ch.label, self.subject_id
                )));
            }
            ch.validate()?;
            let expected = (self.duration_s * ch.rate_hz).round();
            if (ch.samples.len() as f64 - expected).abs() > 1.0 {
                return Err(Error::Validation(format!(
                    "channel `{}` has {} samples, expected {} for {} s at {} Hz",
                    ch.label,
                    ch.samples.len(),
                    expected,
                    self.duration_s,
                    ch.rate_hz
                )));
            }
        }
        Ok(())
    }

    pub fn channel(&self, label: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.label == label)
    }

    pub fn channels_where<'a>(
        &'a self,
        pred: impl Fn(&ChannelKind) -> bool + 'a,
    ) -> impl Iterator<Item = &'a Channel> + 'a {
        self.channels.iter().filter(move |c| pred(&c.kind))
    }

    pub fn eeg(&self, electrode: &str) -> Option<&Channel> {
        self.channels
            .iter()
            .find(|c| matches!(&c.kind, ChannelKind::Eeg { electrode: e } if e == electrode))
    }

    pub fn eog(&self, axis: EogAxis) -> Option<&Channel> {
        self.channels
            .iter()
            .find(|c| matches!(&c.kind, ChannelKind::Eog { axis: a } if *a == axis))
    }

    pub fn ecg_leads(&self) -> Vec<&Channel> {
        self.channels_where(|k| matches!(k, ChannelKind::Ecg { .. }))
            .collect()
    }

    /// The x, y, z accelerometer channels at one placement, if all three exist.
    pub fn accel(&self, placement: Placement) -> Option<[&Channel; 3]> {
        let find = |axis: Axis| {
            self.channels.iter().find(|c| {
                matches!(&c.kind, ChannelKind::Accel { placement: p, axis: a } if *p == placement && *a == axis)
            })
        };
        Some([find(Axis::X)?, find(Axis::Y)?, find(Axis::Z)?])
    }

    pub fn footswitches(&self) -> Vec<&Channel> {
        self.channels_where(|k| matches!(k, ChannelKind::Footswitch { .. }))
            .collect()
    }
}
