use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{sample_normal, Effects, SynthConfig};
use crate::error::{Error, Result};
use crate::signalio::Episode;

/// Leading and trailing margins kept free of episodes.
pub const START_MARGIN_S: f64 = 15.0;
pub const END_MARGIN_S: f64 = 10.0;
/// Minimum quiet time between consecutive episodes.
pub const MIN_GAP_S: f64 = 5.0;
const OTHER_STOP_RANGE_S: (f64, f64) = (2.0, 5.0);

/// Which modality effects an injected FOG episode carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FogEvent {
    pub onset_s: f64,
    pub offset_s: f64,
    pub motion_effect: bool,
    pub spv_effect: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Normal,
    Freezing,
    Stopped,
}

/// Ground-truth regime schedule of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub duration_s: f64,
    pub fog: Vec<FogEvent>,
    pub stops: Vec<(f64, f64)>,
}

impl Timeline {
    pub fn generate(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let duration_s = cfg.duration_s();
        let minutes = duration_s / 60.0;
        let n_fog = (cfg.fog_rate_per_min * minutes).round() as usize;
        let n_stop = (cfg.other_stop_rate_per_min * minutes).round() as usize;
        let d = &cfg.fog_duration;
        let mut items: Vec<(bool, f64)> = Vec::with_capacity(n_fog + n_stop);
        for _ in 0..n_fog {
            let v = (d.median_s.ln() + d.sigma * sample_normal(rng)).exp();
            items.push((true, v.clamp(d.min_s, d.max_s)));
        }
        for _ in 0..n_stop {
            items.push((false, rng.random_range(OTHER_STOP_RANGE_S.0..OTHER_STOP_RANGE_S.1)));
        }
        // interleave stops at random positions
        for i in (1..items.len()).rev() {
            let j = rng.random_range(0..=i);
            items.swap(i, j);
        }
        let busy: f64 = items.iter().map(|(_, d)| d).sum::<f64>() + MIN_GAP_S * items.len().saturating_sub(1) as f64;
        let free = duration_s - START_MARGIN_S - END_MARGIN_S - busy;
        if free < 0.0 {
            return Err(Error::Config(format!(
                "{n_fog} FOG and {n_stop} other-stop episodes need {:.1} s but only {:.1} s are available; \
                 lower fog_rate_per_min or lengthen the tasks",
                busy,
                duration_s - START_MARGIN_S - END_MARGIN_S
            )));
        }
        let mut cuts: Vec<f64> = (0..items.len()).map(|_| rng.random_range(0.0..=free)).collect();
        cuts.sort_by(f64::total_cmp);
        let mut fog = Vec::new();
        let mut stops = Vec::new();
        let mut t = START_MARGIN_S;
        let mut prev_cut = 0.0;
        for (k, ((is_fog, dur), cut)) in items.iter().zip(&cuts).enumerate() {
            t += cut - prev_cut + if k > 0 { MIN_GAP_S } else { 0.0 };
            prev_cut = *cut;
            let (on, off) = (round_ms(t), round_ms(t + dur));
            if *is_fog {
                let dropped = rng.random::<f64>() < cfg.effects.effect_dropout;
                let eye_dropped = rng.random::<bool>();
                fog.push(FogEvent {
                    onset_s: on,
                    offset_s: off,
                    motion_effect: !(dropped && !eye_dropped),
                    spv_effect: !(dropped && eye_dropped),
                });
            } else {
                stops.push((on, off));
            }
            t += dur;
        }
        Ok(Timeline { duration_s, fog, stops })
    }

    pub fn fog_episodes(&self) -> Vec<Episode> {
        self.fog.iter().map(|e| Episode::fog(e.onset_s, e.offset_s)).collect()
    }

    pub fn episodes(&self) -> Vec<Episode> {
        let mut all = self.fog_episodes();
        all.extend(self.stops.iter().map(|&(a, b)| Episode::other_stop(a, b)));
        all.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
        all
    }

    /// Motor regime at `t`; intervals are `[onset, offset)`.
    pub fn motion_at(&self, t: f64) -> Motion {
        if self.fog.iter().any(|e| e.motion_effect && t >= e.onset_s && t < e.offset_s) {
            Motion::Freezing
        } else if self.stops.iter().any(|&(a, b)| t >= a && t < b) {
            Motion::Stopped
        } else {
            Motion::Normal
        }
    }

    pub fn in_fog(&self, t: f64) -> bool {
        self.fog.iter().any(|e| t >= e.onset_s && t < e.offset_s)
    }

    /// Multiplier on slow-phase eye velocity: 1 at baseline, settling at
    /// `1 - lead_fraction * slowdown` within about a second of `lead` seconds
    /// before onset, at `1 - slowdown` through the episode and restored over
    /// `recovery` seconds after offset.
    pub fn spv_envelope(&self, t: f64, fx: &Effects, recovery: f64) -> f64 {
        const TAU_S: f64 = 0.5;
        let lead = fx.spv_slowdown_lead_s;
        let tau = TAU_S.min(lead / 4.0).max(1e-3);
        let norm = 1.0 - (-lead / tau).exp();
        let mut env: f64 = 1.0;
        for e in self.fog.iter().filter(|e| e.spv_effect) {
            let start = e.onset_s - lead;
            let drop = if t < start || t >= e.offset_s + recovery {
                0.0
            } else if t < e.onset_s {
                fx.spv_lead_fraction * (1.0 - (-(t - start) / tau).exp()) / norm
            } else if t < e.offset_s {
                1.0
            } else {
                1.0 - (t - e.offset_s) / recovery
            };
            env = env.min(1.0 - fx.spv_slowdown * drop);
        }
        env
    }
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}
