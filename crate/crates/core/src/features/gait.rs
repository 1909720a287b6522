//! Stride duration from footswitch channels.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureSeries};
use crate::error::{Error, Result};
use crate::signalio::{Channel, ChannelKind, Foot};

/// Switch indices whose activation means floor contact, per foot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeySwitchSet {
    pub left: Vec<u32>,
    pub right: Vec<u32>,
}

impl KeySwitchSet {
    pub fn keys(&self, foot: Foot) -> &[u32] {
        match foot {
            Foot::Left => &self.left,
            Foot::Right => &self.right,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for foot in [Foot::Left, Foot::Right] {
            if self.keys(foot).is_empty() {
                return Err(Error::Config(format!("empty key-switch set for {} foot", foot.as_str())));
            }
        }
        Ok(())
    }
}

/// Contact thresholds in volts, indexed by switch index, per foot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl Thresholds {
    pub fn uniform(volts: f64, n_switches: usize) -> Self {
        Thresholds {
            left: vec![volts; n_switches],
            right: vec![volts; n_switches],
        }
    }

    pub fn get(&self, foot: Foot, switch_index: u32) -> Option<f64> {
        let row = match foot {
            Foot::Left => &self.left,
            Foot::Right => &self.right,
        };
        row.get(switch_index as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectSwitches {
    pub keys: KeySwitchSet,
    pub thresholds_v: Thresholds,
}

/// Per-subject footswitch configuration, stored as TOML:
///
/// ```toml
/// [subjects.S01.keys]
/// left = [0, 2]
/// right = [1, 3]
///
/// [subjects.S01.thresholds_v]
/// left = [1.0, 1.0, 1.0, 1.0]
/// right = [1.0, 1.0, 1.0, 1.0]
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootswitchConfig {
    pub subjects: BTreeMap<String, SubjectSwitches>,
}

impl FootswitchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: FootswitchConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("footswitch config: {e}")))?;
        for (subject, s) in &cfg.subjects {
            s.keys
                .validate()
                .map_err(|e| Error::Config(format!("subject {subject}: {e}")))?;
            for foot in [Foot::Left, Foot::Right] {
                for &k in s.keys.keys(foot) {
                    if s.thresholds_v.get(foot, k).is_none() {
                        return Err(Error::Config(format!(
                            "subject {subject}: no threshold for {} switch {k}",
                            foot.as_str()
                        )));
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("footswitch config is always serializable")
    }

    pub fn subject(&self, id: &str) -> Result<&SubjectSwitches> {
        self.subjects
            .get(id)
            .ok_or_else(|| Error::Config(format!("no footswitch configuration for subject {id}")))
    }
}

/// Per-sample floor contact of one foot: any key switch above its threshold.
pub fn foot_contacts(
    switches: &[&Channel],
    foot: Foot,
    keys: &KeySwitchSet,
    thresholds: &Thresholds,
) -> Result<Vec<bool>> {
    let mut chans = Vec::new();
    for &k in keys.keys(foot) {
        let ch = switches
            .iter()
            .find(|c| matches!(c.kind, ChannelKind::Footswitch { foot: f, switch_index } if f == foot && switch_index == k))
            .ok_or_else(|| Error::param("switches", format!("missing {} switch {k}", foot.as_str())))?;
        let thr = thresholds
            .get(foot, k)
            .ok_or_else(|| Error::param("thresholds", format!("missing {} threshold {k}", foot.as_str())))?;
        chans.push((ch, thr));
    }
    let n = chans.first().map(|(c, _)| c.samples.len()).unwrap_or(0);
    if chans.iter().any(|(c, _)| c.samples.len() != n) {
        return Err(Error::Alignment("footswitch channels differ in length".into()));
    }
    Ok((0..n)
        .map(|i| chans.iter().any(|(c, thr)| c.samples[i] > *thr))
        .collect())
}

/// Indices where contact switches from off to on.
pub fn strike_indices(contact: &[bool]) -> Vec<usize> {
    (1..contact.len())
        .filter(|&i| contact[i] && !contact[i - 1])
        .collect()
}

/// Duration of the stride containing each sample, from successive strikes of
/// one foot. Missing before the first and from the last strike on.
pub(crate) fn stride_per_sample(strikes: &[usize], n: usize, rate_hz: f64) -> Vec<Option<f64>> {
    let mut out = vec![None; n];
    for w in strikes.windows(2) {
        let d = (w[1] - w[0]) as f64 / rate_hz;
        out[w[0]..w[1]].iter_mut().for_each(|o| *o = Some(d));
    }
    out
}

/// Per-sample stride duration, the mean over feet where both are defined.
pub fn stride_duration(
    switches: &[&Channel],
    keys: &KeySwitchSet,
    thresholds: &Thresholds,
) -> Result<FeatureSeries> {
    keys.validate()?;
    let rate = switches
        .first()
        .map(|c| c.rate_hz)
        .ok_or_else(|| Error::param("switches", "no footswitch channels"))?;
    let left = foot_contacts(switches, Foot::Left, keys, thresholds)?;
    let right = foot_contacts(switches, Foot::Right, keys, thresholds)?;
    if left.len() != right.len() {
        return Err(Error::Alignment("left and right footswitches differ in length".into()));
    }
    let n = left.len();
    let l = stride_per_sample(&strike_indices(&left), n, rate);
    let r = stride_per_sample(&strike_indices(&right), n, rate);
    let values = l
        .iter()
        .zip(&r)
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Some(0.5 * (a + b)),
            (Some(v), None) | (None, Some(v)) => Some(*v),
            (None, None) => None,
        })
        .collect();
    Ok(FeatureSeries::new(FeatureKind::StrideDuration, rate, values))
}
