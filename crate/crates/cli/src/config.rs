//! Run configuration: a TOML file with one section per pipeline stage.
//! Every key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use fogsense::evaluate::{LosoParams, SelectionMode, CONTEXT_S, EPOCH_OVERLAP, EPOCH_WINDOW_S, FOG_BUFFER_S};
use fogsense::features::{FeatureKind, ThetaParams};
use fogsense::model::{BoostParams, FeatureMode};
use fogsense::pipeline::FeatureParams;
use fogsense::select::{Discretizer, DEFAULT_SU_THRESHOLD};
use fogsense::synth::{DurationDist, Effects, Noise, SynthConfig};
use serde::{Deserialize, Serialize};

/// The literal accepted by `--config` for the built-in defaults.
pub const DEFAULT_CONFIG: &str = "default";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{key} = {value} is out of range: {bounds}")]
    Range { key: String, value: String, bounds: String },
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed for data generation and boosting.
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthSection,
    pub features: FeaturesSection,
    pub selection: SelectionSection,
    pub model: ModelSection,
    pub evaluation: EvaluationSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            paths: Paths::default(),
            synth: SynthSection::default(),
            features: FeaturesSection::default(),
            selection: SelectionSection::default(),
            model: ModelSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { data_dir: "data".into(), out_dir: "out".into() }
    }
}

/// The synthetic generator's settings; its seed is the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
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
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        SynthSection {
            n_subjects: d.n_subjects,
            task_duration_s: d.task_duration_s,
            tasks_per_subject: d.tasks_per_subject,
            turn_period_s: d.turn_period_s,
            turn_velocity_dps: d.turn_velocity_dps,
            fog_rate_per_min: d.fog_rate_per_min,
            other_stop_rate_per_min: d.other_stop_rate_per_min,
            fog_duration: d.fog_duration,
            effects: d.effects,
            noise: d.noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    /// `offline` (zero-phase filters) or `causal` (the streaming extractor).
    pub mode: FeatureMode,
    pub spv_seed: u64,
    pub theta: ThetaParams,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let p = FeatureParams::default();
        FeaturesSection { mode: FeatureMode::Offline, spv_seed: p.spv_seed, theta: p.theta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    #[default]
    PerFold,
    Global,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub su_threshold: f64,
    pub mode: SelectionKind,
    /// Feature names for `mode = "fixed"`.
    pub features: Vec<String>,
    pub discretizer: Discretizer,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection {
            su_threshold: DEFAULT_SU_THRESHOLD,
            mode: SelectionKind::PerFold,
            features: Vec::new(),
            discretizer: Discretizer::default(),
        }
    }
}

/// Boosting settings; the seed is the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub n_rounds: usize,
    pub max_depth: usize,
    #[serde(with = "fogsense::model::ratio_serde")]
    pub undersample_ratio: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let b = BoostParams::default();
        ModelSection { n_rounds: b.n_rounds, max_depth: b.max_depth, undersample_ratio: b.undersample_ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub window_s: f64,
    pub overlap: f64,
    pub buffer_s: f64,
    pub tau: f64,
    /// Single-feature systems whose per-subject MCC is compared against the
    /// full system.
    pub compare_features: Vec<String>,
    /// Also retrain every fold with the held-out subject scrambled and
    /// report whether the model changed.
    pub leakage_probe: bool,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            window_s: EPOCH_WINDOW_S,
            overlap: EPOCH_OVERLAP,
            buffer_s: FOG_BUFFER_S,
            tau: 0.5,
            compare_features: Vec::new(),
            leakage_probe: false,
        }
    }
}

fn range(key: &str, value: impl ToString, ok: bool, bounds: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Range { key: key.into(), value: value.to_string(), bounds: bounds.into() })
    }
}

fn check_feature_names(key: &str, names: &[String]) -> Result<(), ConfigError> {
    for n in names {
        range(key, format!("{n:?}"), FeatureKind::from_name(n).is_some(), "must name a known feature")?;
    }
    Ok(())
}

impl RunConfig {
    /// Reads, defaults and range-checks a config file. `default` selects the
    /// built-in defaults without touching the file system.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        if path.as_os_str() == DEFAULT_CONFIG {
            return Ok(RunConfig::default());
        }
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { reason, .. } => ConfigError::Parse { path: path.into(), reason },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: PathBuf::new(), reason: e.message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.synth;
        range("synth.n_subjects", s.n_subjects, (1..=1000).contains(&s.n_subjects), "[1, 1000]")?;
        range("synth.tasks_per_subject", s.tasks_per_subject, (1..=100).contains(&s.tasks_per_subject), "[1, 100]")?;
        range(
            "synth.task_duration_s",
            s.task_duration_s,
            s.task_duration_s > 0.0 && s.task_duration_s <= 3600.0,
            "(0, 3600]",
        )?;
        self.synth_config().validate().map_err(|e| match e {
            fogsense::Error::Parameter { name, reason } => ConfigError::Invalid { key: format!("synth.{name}"), reason },
            other => ConfigError::Invalid { key: "synth".into(), reason: other.to_string() },
        })?;

        let t = &self.features.theta;
        range(
            "features.theta.prefilter_lo_hz",
            t.prefilter_lo_hz,
            t.prefilter_lo_hz > 0.0 && t.prefilter_lo_hz < t.prefilter_hi_hz,
            "(0, prefilter_hi_hz)",
        )?;
        range(
            "features.theta.prefilter_hi_hz",
            t.prefilter_hi_hz,
            t.prefilter_hi_hz < 250.0,
            "(prefilter_lo_hz, 250)",
        )?;
        range("features.theta.prefilter_order", t.prefilter_order, (1..=8).contains(&t.prefilter_order), "[1, 8]")?;
        range(
            "features.theta.band_lo_hz",
            t.band_lo_hz,
            t.band_lo_hz > 0.0 && t.band_lo_hz < t.band_hi_hz,
            "(0, band_hi_hz)",
        )?;
        range("features.theta.band_hi_hz", t.band_hi_hz, t.band_hi_hz < 250.0, "(band_lo_hz, 250)")?;
        range("features.theta.n_freqs", t.n_freqs, (1..=200).contains(&t.n_freqs), "[1, 200]")?;
        range("features.theta.cycles", t.cycles, t.cycles >= 1.0 && t.cycles <= 50.0, "[1, 50]")?;

        let sel = &self.selection;
        range("selection.su_threshold", sel.su_threshold, (0.0..=1.0).contains(&sel.su_threshold), "[0, 1]")?;
        if let Discretizer::EqualFrequency { bins } = sel.discretizer {
            range("selection.discretizer.bins", bins, (2..=1000).contains(&bins), "[2, 1000]")?;
        }
        check_feature_names("selection.features", &sel.features)?;
        range(
            "selection.features",
            format!("{:?}", sel.features),
            sel.mode != SelectionKind::Fixed || !sel.features.is_empty(),
            "must list at least one feature when mode = \"fixed\"",
        )?;

        let m = &self.model;
        range("model.n_rounds", m.n_rounds, (1..=10_000).contains(&m.n_rounds), "[1, 10000]")?;
        range("model.max_depth", m.max_depth, (1..=16).contains(&m.max_depth), "[1, 16]")?;
        range(
            "model.undersample_ratio",
            m.undersample_ratio,
            m.undersample_ratio > 0.0,
            "(0, inf]",
        )?;

        let e = &self.evaluation;
        range(
            "evaluation.window_s",
            e.window_s,
            e.window_s > 0.0 && e.window_s <= CONTEXT_S,
            &format!("(0, {CONTEXT_S}]"),
        )?;
        range("evaluation.overlap", e.overlap, (0.0..1.0).contains(&e.overlap), "[0, 1)")?;
        range("evaluation.buffer_s", e.buffer_s, (0.0..=30.0).contains(&e.buffer_s), "[0, 30]")?;
        range("evaluation.tau", e.tau, (0.0..=1.0).contains(&e.tau), "[0, 1]")?;
        check_feature_names("evaluation.compare_features", &e.compare_features)
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            n_subjects: s.n_subjects,
            task_duration_s: s.task_duration_s,
            tasks_per_subject: s.tasks_per_subject,
            turn_period_s: s.turn_period_s,
            turn_velocity_dps: s.turn_velocity_dps,
            fog_rate_per_min: s.fog_rate_per_min,
            other_stop_rate_per_min: s.other_stop_rate_per_min,
            fog_duration: s.fog_duration.clone(),
            effects: s.effects.clone(),
            noise: s.noise.clone(),
            seed: self.seed,
        }
    }

    pub fn feature_params(&self) -> FeatureParams {
        FeatureParams { theta: self.features.theta, spv_seed: self.features.spv_seed }
    }

    pub fn boost_params(&self) -> BoostParams {
        BoostParams {
            n_rounds: self.model.n_rounds,
            max_depth: self.model.max_depth,
            undersample_ratio: self.model.undersample_ratio,
            seed: self.seed,
        }
    }

    pub fn selection_mode(&self) -> SelectionMode {
        match self.selection.mode {
            SelectionKind::PerFold => SelectionMode::PerFold,
            SelectionKind::Global => SelectionMode::Global,
            SelectionKind::Fixed => SelectionMode::Fixed(self.selection.features.clone()),
        }
    }

    pub fn loso_params(&self) -> LosoParams {
        LosoParams {
            selection: self.selection_mode(),
            su_threshold: self.selection.su_threshold,
            discretizer: self.selection.discretizer,
            boost: self.boost_params(),
            tau: self.evaluation.tau,
            buffer_s: self.evaluation.buffer_s,
            feature_mode: self.features.mode,
        }
    }
}
