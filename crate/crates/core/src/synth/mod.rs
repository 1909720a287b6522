//! Deterministic synthetic multi-modal recordings with ground-truth
//! annotations.
//!
//! Each subject turns in place with an alternating head-turn velocity. The
//! turning drives a nystagmus sawtooth in the horizontal EOG, and stepping
//! drives accelerometers and footswitches. Freezing episodes lower motion
//! amplitude (tremble more than locomotion), lengthen strides and, starting
//! a few seconds earlier, slow the eye's slow phase. ECG and EEG carry no
//! freezing-locked change unless configured.

mod signals;
mod timeline;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::pipeline::{CONSENSUS_RATER, FOOTSWITCH_FILE};
use crate::features::{FootswitchConfig, KeySwitchSet, SubjectSwitches, Thresholds};
use crate::signalio::{
    annotation_path, write_annotations, write_recording, AnnotationTrack, Axis, Channel, ChannelKind, EogAxis,
    Episode, Foot, Placement, Recording,
};

pub use signals::{BODY_RATE_HZ, EEG_EOG_RATE_HZ};
pub use timeline::{FogEvent, Motion, Timeline, END_MARGIN_S, MIN_GAP_S, START_MARGIN_S};

pub const SYNTH_CONFIG_FILE: &str = "synth_config.toml";
const RATER_JITTER_S: f64 = 0.2;
const FOOTSWITCH_THRESHOLD_V: f64 = 1.0;

pub(crate) fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DurationDist {
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// Log-normal shape parameter.
    pub sigma: f64,
}

impl Default for DurationDist {
    fn default() -> Self {
        DurationDist { median_s: 3.0, min_s: 1.0, max_s: 120.0, sigma: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Effects {
    /// Fractional freeze-index reduction during freezing.
    pub fi_drop: f64,
    /// Locomotion amplitude multiplier during freezing.
    pub motion_scale: f64,
    /// Fractional slow-phase velocity reduction.
    pub spv_slowdown: f64,
    pub spv_slowdown_lead_s: f64,
    /// Share of the slowdown already reached at onset; the rest sets in
    /// with the freeze.
    pub spv_lead_fraction: f64,
    pub stride_inflation: f64,
    pub hr_effect_bpm: f64,
    /// Fractional theta amplitude change during freezing.
    pub theta_effect: f64,
    /// Trembling in place during freezing, which raises the freeze index.
    pub fog_tremor: bool,
    /// Per-episode probability that one modality, either the motion effects
    /// or the eye effect with equal odds, shows no change.
    pub effect_dropout: f64,
}

impl Default for Effects {
    fn default() -> Self {
        Effects {
            fi_drop: 0.9,
            motion_scale: 0.6,
            spv_slowdown: 0.8,
            spv_slowdown_lead_s: 5.5,
            spv_lead_fraction: 0.5,
            stride_inflation: 1.6,
            hr_effect_bpm: 0.0,
            theta_effect: 0.0,
            fog_tremor: false,
            effect_dropout: 0.0,
        }
    }
}

impl Effects {
    /// Locomotion and tremble amplitude multipliers while freezing.
    pub fn freezing_amplitudes(&self) -> (f64, f64) {
        let loco = self.motion_scale;
        let trem = if self.fog_tremor { 3.0 } else { self.motion_scale * (1.0 - self.fi_drop).sqrt() };
        (loco, trem)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    pub accel_g: f64,
    pub eog_uv: f64,
    pub ecg_mv: f64,
    pub eeg_uv: f64,
    pub footswitch_v: f64,
}

impl Default for Noise {
    fn default() -> Self {
        Noise { accel_g: 0.02, eog_uv: 1.0, ecg_mv: 0.02, eeg_uv: 10.0, footswitch_v: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub task_duration_s: f64,
    pub tasks_per_subject: usize,
    pub turn_period_s: f64,
    pub turn_velocity_dps: f64,
    pub fog_rate_per_min: f64,
    pub other_stop_rate_per_min: f64,
    pub fog_duration: DurationDist,
    pub effects: Effects,
    pub noise: Noise,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 15,
            task_duration_s: 120.0,
            tasks_per_subject: 4,
            turn_period_s: 8.0,
            turn_velocity_dps: 100.0,
            fog_rate_per_min: 2.5,
            other_stop_rate_per_min: 0.25,
            fog_duration: DurationDist::default(),
            effects: Effects::default(),
            noise: Noise::default(),
            seed: 42,
        }
    }
}

fn check(name: &'static str, ok: bool, why: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::param(name, why.to_string()))
    }
}

impl SynthConfig {
    pub fn duration_s(&self) -> f64 {
        self.task_duration_s * self.tasks_per_subject as f64
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.fog_duration;
        let fx = &self.effects;
        let nz = &self.noise;
        check("n_subjects", self.n_subjects >= 1, "must be at least 1")?;
        check("tasks_per_subject", self.tasks_per_subject >= 1, "must be at least 1")?;
        check(
            "task_duration_s",
            self.task_duration_s.is_finite() && self.duration_s() > START_MARGIN_S + END_MARGIN_S,
            "recording must outlast the episode-free margins",
        )?;
        check("turn_period_s", self.turn_period_s.is_finite() && self.turn_period_s > 0.0, "must be positive")?;
        check("turn_velocity_dps", self.turn_velocity_dps.is_finite() && self.turn_velocity_dps > 0.0, "must be positive")?;
        check("fog_rate_per_min", self.fog_rate_per_min.is_finite() && self.fog_rate_per_min >= 0.0, "must be non-negative")?;
        check(
            "other_stop_rate_per_min",
            self.other_stop_rate_per_min.is_finite() && self.other_stop_rate_per_min >= 0.0,
            "must be non-negative",
        )?;
        check("fog_duration.min_s", d.min_s.is_finite() && d.min_s > 0.0, "must be positive")?;
        check("fog_duration.max_s", d.max_s.is_finite() && d.max_s >= d.min_s, "must be at least min_s")?;
        check("fog_duration.median_s", (d.min_s..=d.max_s).contains(&d.median_s), "must lie within [min_s, max_s]")?;
        check("fog_duration.sigma", d.sigma.is_finite() && d.sigma >= 0.0, "must be non-negative")?;
        check("effects.fi_drop", (0.0..=1.0).contains(&fx.fi_drop), "must lie within [0, 1]")?;
        check("effects.motion_scale", fx.motion_scale.is_finite() && fx.motion_scale >= 0.0, "must be non-negative")?;
        check("effects.spv_slowdown", (0.0..=1.0).contains(&fx.spv_slowdown), "must lie within [0, 1]")?;
        check(
            "effects.spv_lead_fraction",
            (0.0..=1.0).contains(&fx.spv_lead_fraction),
            "must lie within [0, 1]",
        )?;
        check(
            "effects.spv_slowdown_lead_s",
            fx.spv_slowdown_lead_s.is_finite() && fx.spv_slowdown_lead_s > 0.0,
            "must be positive",
        )?;
        check(
            "effects.stride_inflation",
            fx.stride_inflation.is_finite() && fx.stride_inflation > 0.0,
            "must be positive",
        )?;
        check("effects.hr_effect_bpm", fx.hr_effect_bpm.is_finite(), "must be finite")?;
        check("effects.theta_effect", fx.theta_effect.is_finite() && fx.theta_effect > -1.0, "must exceed -1")?;
        check("effects.effect_dropout", (0.0..=1.0).contains(&fx.effect_dropout), "must lie within [0, 1]")?;
        for (name, v) in [
            ("noise.accel_g", nz.accel_g),
            ("noise.eog_uv", nz.eog_uv),
            ("noise.ecg_mv", nz.ecg_mv),
            ("noise.eeg_uv", nz.eeg_uv),
            ("noise.footswitch_v", nz.footswitch_v),
        ] {
            check(name, v.is_finite() && v >= 0.0, "must be non-negative")?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::Config(format!("synth config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("synth config is always serializable")
    }
}

/// One generated subject.
#[derive(Debug, Clone)]
pub struct SyntheticSubject {
    pub recording: Recording,
    /// Consensus (exact truth) first, then two jittered raters.
    pub annotations: Vec<AnnotationTrack>,
    pub switches: SubjectSwitches,
    pub timeline: Timeline,
}

impl SyntheticSubject {
    pub fn consensus(&self) -> &AnnotationTrack {
        &self.annotations[0]
    }
}

pub fn subject_id(index: usize) -> String {
    format!("S{:02}", index + 1)
}

/// Independent stream per (subject, purpose) so that changing one modality
/// leaves the others untouched.
fn stream(cfg: &SynthConfig, subject: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(subject as u64 * 64 + purpose);
    rng
}

fn jittered_track(rater: &str, truth: &[Episode], rng: &mut ChaCha8Rng) -> Result<AnnotationTrack> {
    let mut out: Vec<Episode> = Vec::with_capacity(truth.len());
    for ep in truth {
        let on = ep.onset_s + RATER_JITTER_S * sample_normal(rng);
        let off = (ep.offset_s + RATER_JITTER_S * sample_normal(rng)).max(on + 0.2);
        if out.last().is_some_and(|p| p.offset_s >= on) {
            continue;
        }
        out.push(Episode { onset_s: on.max(0.0), offset_s: off, label: ep.label });
    }
    AnnotationTrack::new(rater, out)
}

fn draw_switches(rng: &mut ChaCha8Rng) -> SubjectSwitches {
    use rand::Rng;
    let pick = |rng: &mut ChaCha8Rng| {
        let mut keys = vec![0u32];
        for k in 1..4 {
            if rng.random::<f64>() < 0.5 {
                keys.push(k);
            }
        }
        keys
    };
    let left = pick(rng);
    let right = pick(rng);
    SubjectSwitches {
        keys: KeySwitchSet { left, right },
        thresholds_v: Thresholds::uniform(FOOTSWITCH_THRESHOLD_V, 4),
    }
}

pub fn generate_subject(cfg: &SynthConfig, index: usize) -> Result<SyntheticSubject> {
    cfg.validate()?;
    let id = subject_id(index);
    let timeline = Timeline::generate(cfg, &mut stream(cfg, index, 0))?;
    let subject = signals::Subject::draw(cfg, &mut stream(cfg, index, 1));
    let duration = timeline.duration_s;

    let mut channels = Vec::new();
    let (fz, cz) = signals::eeg(cfg, &subject, &timeline, &mut stream(cfg, index, 2));
    channels.push(Channel::new("EEG_Fz", ChannelKind::Eeg { electrode: "Fz".into() }, EEG_EOG_RATE_HZ, fz)?);
    channels.push(Channel::new("EEG_Cz", ChannelKind::Eeg { electrode: "Cz".into() }, EEG_EOG_RATE_HZ, cz)?);
    let (h, v) = signals::eog(cfg, &subject, &timeline, &mut stream(cfg, index, 3));
    channels.push(Channel::new("EOG_H", ChannelKind::Eog { axis: EogAxis::Horizontal }, EEG_EOG_RATE_HZ, h)?);
    channels.push(Channel::new("EOG_V", ChannelKind::Eog { axis: EogAxis::Vertical }, EEG_EOG_RATE_HZ, v)?);

    let t = signals::grid(duration, BODY_RATE_HZ);
    let leads = signals::ecg(&t, cfg, &subject, &timeline, &mut stream(cfg, index, 4));
    for (name, samples) in ["I", "II", "III"].iter().zip(leads) {
        channels.push(Channel::new(format!("ECG_{name}"), ChannelKind::Ecg { lead: name.to_string() }, BODY_RATE_HZ, samples)?);
    }
    let phase = signals::gait_phase(&t, cfg, &subject, &timeline);
    let accel = signals::accelerometers(&t, &phase, cfg, &subject, &timeline, &mut stream(cfg, index, 5));
    for (placement, axes) in Placement::ALL.iter().zip(accel) {
        for (axis, samples) in [Axis::X, Axis::Y, Axis::Z].into_iter().zip(axes) {
            let label = format!("ACC_{}_{}", placement.as_str(), format!("{axis:?}").to_lowercase());
            channels.push(Channel::new(label, ChannelKind::Accel { placement: *placement, axis }, BODY_RATE_HZ, samples)?);
        }
    }
    let fs = signals::footswitches(&phase, cfg, &mut stream(cfg, index, 6));
    for (foot, per_switch) in [Foot::Left, Foot::Right].into_iter().zip(fs) {
        for (k, samples) in per_switch.into_iter().enumerate() {
            let label = format!("FSW_{}_{k}", foot.as_str());
            channels.push(Channel::new(label, ChannelKind::Footswitch { foot, switch_index: k as u32 }, BODY_RATE_HZ, samples)?);
        }
    }
    let recording = Recording::new(id.clone(), channels, duration)?;

    let truth = timeline.episodes();
    let mut rater_rng = stream(cfg, index, 7);
    let annotations = vec![
        AnnotationTrack::new(CONSENSUS_RATER, truth.clone())?,
        jittered_track("rater_a", &truth, &mut rater_rng)?,
        jittered_track("rater_b", &truth, &mut rater_rng)?,
    ];
    let switches = draw_switches(&mut stream(cfg, index, 8));
    Ok(SyntheticSubject { recording, annotations, switches, timeline })
}

/// All subjects, generated in parallel.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<SyntheticSubject>> {
    cfg.validate()?;
    (0..cfg.n_subjects).into_par_iter().map(|i| generate_subject(cfg, i)).collect()
}

pub fn footswitch_config(subjects: &[SyntheticSubject]) -> FootswitchConfig {
    FootswitchConfig {
        subjects: subjects.iter().map(|s| (s.recording.subject_id.clone(), s.switches.clone())).collect(),
    }
}

/// Writes recordings, annotations, the footswitch configuration and the
/// generating config into `dir`.
pub fn write_dataset(dir: &Path, cfg: &SynthConfig, subjects: &[SyntheticSubject]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    subjects.par_iter().try_for_each(|s| {
        write_recording(dir, &s.recording)?;
        write_annotations(&annotation_path(dir, &s.recording.subject_id), &s.annotations)
    })?;
    let fs_path = dir.join(FOOTSWITCH_FILE);
    std::fs::write(&fs_path, footswitch_config(subjects).to_toml()).map_err(|e| Error::io(&fs_path, e))?;
    let cfg_path = dir.join(SYNTH_CONFIG_FILE);
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))
}

/// Generates and writes the dataset one subject per worker at a time, so
/// memory stays bounded by the thread count rather than the subject count.
pub fn generate_to_dir(dir: &Path, cfg: &SynthConfig) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let switches = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|i| {
            let s = generate_subject(cfg, i)?;
            write_recording(dir, &s.recording)?;
            write_annotations(&annotation_path(dir, &s.recording.subject_id), &s.annotations)?;
            Ok((s.recording.subject_id, s.switches))
        })
        .collect::<Result<_>>()?;
    let fs_path = dir.join(FOOTSWITCH_FILE);
    std::fs::write(&fs_path, FootswitchConfig { subjects: switches }.to_toml()).map_err(|e| Error::io(&fs_path, e))?;
    let cfg_path = dir.join(SYNTH_CONFIG_FILE);
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))
}
