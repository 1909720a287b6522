//! Causal feature extraction and the streaming detector.
//!
//! One [`CausalExtractor`] backs both the offline causal pipeline
//! ([`causal_epochs`]) and the live [`StreamDetector`], so a replayed
//! recording scores identically through either path. Each channel keeps a
//! trailing buffer of [`CONTEXT_S`] seconds; EEG and EOG pass through
//! continuously running causal filters before buffering. When every channel
//! has delivered the samples up to an epoch's end, the feature kernels run on
//! the buffers and each feature is averaged over the epoch's window. Nothing
//! after the epoch end is ever read.

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::epochs::window_mean;
use crate::dsp::{morlet_band_power, FilterKind, Sos, SosState};
use crate::error::{Error, Result};
use crate::features::{
    classify_slow_phase, directions_from_velocity, freeze_index, lead_heart_rate, median_across, stride_duration,
    velocity_from_lowpassed, FeatureKind, SubjectSwitches, TurnDirection, SPV_LOWPASS_HZ, SPV_WAVELET_LEVEL,
    VOLTS_TO_MICROVOLTS,
};
use crate::model::{DetectorModel, Epoch, EpochDataset, EpochLabel, FeatureMode};
use crate::pipeline::FeatureParams;
use crate::signalio::{Axis, Channel, ChannelKind, ChannelMeta, EogAxis, Placement, Recording, Sidecar};

/// Trailing history each epoch's features are computed from.
pub const CONTEXT_S: f64 = 10.24;
const EOG_LOWPASS_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Fz,
    Cz,
    EogH,
    Ecg,
    Accel(Placement, Axis),
    Switch,
    Unused,
}

fn role_of(kind: &ChannelKind) -> Role {
    match kind {
        ChannelKind::Eeg { electrode } if electrode == "Fz" => Role::Fz,
        ChannelKind::Eeg { electrode } if electrode == "Cz" => Role::Cz,
        ChannelKind::Eog { axis: EogAxis::Horizontal } => Role::EogH,
        ChannelKind::Ecg { .. } => Role::Ecg,
        ChannelKind::Accel { placement, axis } => Role::Accel(*placement, *axis),
        ChannelKind::Footswitch { .. } => Role::Switch,
        _ => Role::Unused,
    }
}

#[derive(Debug, Clone)]
struct Lane {
    meta: ChannelMeta,
    role: Role,
    filter: Option<(Sos, SosState)>,
    scale: f64,
    ctx_len: usize,
    /// Absolute index of `buf[0]`.
    base: usize,
    buf: VecDeque<f64>,
}

impl Lane {
    fn count(&self) -> usize {
        self.base + self.buf.len()
    }

    fn index_at(&self, t: f64) -> usize {
        (t * self.meta.rate_hz).round() as usize
    }

    fn push(&mut self, x: f64) {
        if self.role == Role::Unused {
            self.base += 1;
            return;
        }
        let mut v = x * self.scale;
        if let Some((sos, state)) = &mut self.filter {
            v = state.process(sos, v);
        }
        self.buf.push_back(v);
    }

    /// Buffer contents ending at absolute sample `end` (exclusive), and where
    /// absolute sample `start` falls in it.
    fn context(&self, start: usize, end: usize) -> (Vec<f64>, usize) {
        let from = end.saturating_sub(self.ctx_len).min(start);
        let v = self.buf.range(from - self.base..end - self.base).copied().collect();
        (v, start - from)
    }

    fn channel(&self, start: usize, end: usize) -> Result<(Channel, usize)> {
        let (v, off) = self.context(start, end);
        Ok((Channel::new(self.meta.label.clone(), self.meta.kind.clone(), self.meta.rate_hz, v)?, off))
    }

    fn trim(&mut self, next_end: usize) {
        let keep = next_end.saturating_sub(self.ctx_len).min(self.count());
        if keep > self.base {
            self.buf.drain(..keep - self.base);
            self.base = keep;
        }
    }

    fn reset(&mut self) {
        self.buf.clear();
        self.base = 0;
        if let Some((_, state)) = &mut self.filter {
            state.reset();
        }
    }
}

/// One completed epoch: times relative to the extractor's origin and the
/// feature vector in [`FeatureKind::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalEpoch {
    pub start_s: f64,
    pub end_s: f64,
    pub features: Vec<Option<f64>>,
}

/// Incremental, causal epoch feature extractor over a fixed channel layout.
#[derive(Debug, Clone)]
pub struct CausalExtractor {
    lanes: Vec<Lane>,
    by_label: HashMap<String, usize>,
    switches: SubjectSwitches,
    params: FeatureParams,
    window_s: f64,
    hop_s: f64,
    next: usize,
}

impl CausalExtractor {
    pub fn new(
        channels: &[ChannelMeta],
        switches: &SubjectSwitches,
        params: &FeatureParams,
        window_s: f64,
        overlap: f64,
    ) -> Result<Self> {
        if !(window_s > 0.0 && window_s <= CONTEXT_S) {
            return Err(Error::param("window_s", format!("{window_s} is outside (0, {CONTEXT_S}]")));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::param("overlap", format!("{overlap} is outside [0, 1)")));
        }
        switches.keys.validate()?;
        let theta = params.theta.prefilter(crate::dsp::Phase::Causal);
        let mut lanes = Vec::with_capacity(channels.len());
        let mut by_label = HashMap::new();
        for meta in channels {
            if !(meta.rate_hz.is_finite() && meta.rate_hz > 0.0) {
                return Err(Error::Validation(format!("channel `{}` has invalid rate {} Hz", meta.label, meta.rate_hz)));
            }
            let role = role_of(&meta.kind);
            let (filter, scale) = match role {
                Role::Fz | Role::Cz => (Some(Sos::butterworth(theta.kind, theta.order, meta.rate_hz)?), VOLTS_TO_MICROVOLTS),
                Role::EogH => (
                    Some(Sos::butterworth(FilterKind::Lowpass { cutoff_hz: SPV_LOWPASS_HZ }, EOG_LOWPASS_ORDER, meta.rate_hz)?),
                    1.0,
                ),
                _ => (None, 1.0),
            };
            if by_label.insert(meta.label.clone(), lanes.len()).is_some() {
                return Err(Error::Validation(format!("duplicate channel label `{}`", meta.label)));
            }
            lanes.push(Lane {
                meta: meta.clone(),
                role,
                filter: filter.map(|sos| {
                    let state = SosState::new(&sos);
                    (sos, state)
                }),
                scale,
                ctx_len: (CONTEXT_S * meta.rate_hz).round() as usize,
                base: 0,
                buf: VecDeque::new(),
            });
        }
        let ex = CausalExtractor {
            lanes,
            by_label,
            switches: switches.clone(),
            params: params.clone(),
            window_s,
            hop_s: window_s * (1.0 - overlap),
            next: 0,
        };
        ex.check_layout()?;
        Ok(ex)
    }

    fn check_layout(&self) -> Result<()> {
        let group = |pred: &dyn Fn(Role) -> bool, what: &str, at_least: usize| -> Result<()> {
            let rates: Vec<f64> = self.lanes.iter().filter(|l| pred(l.role)).map(|l| l.meta.rate_hz).collect();
            if rates.len() < at_least {
                return Err(Error::Validation(format!("stream layout lacks {what}")));
            }
            if rates.iter().any(|&r| r != rates[0]) {
                return Err(Error::Validation(format!("{what} channels differ in rate")));
            }
            Ok(())
        };
        group(&|r| r == Role::Fz || r == Role::Cz, "EEG Fz and Cz", 2)?;
        for (role, what) in [(Role::Fz, "EEG Fz"), (Role::Cz, "EEG Cz"), (Role::EogH, "horizontal EOG")] {
            if self.lanes.iter().filter(|l| l.role == role).count() != 1 {
                return Err(Error::Validation(format!("stream layout needs exactly one {what} channel")));
            }
        }
        group(&|r| r == Role::Ecg, "ECG", 1)?;
        for p in Placement::ALL {
            for a in [Axis::X, Axis::Y, Axis::Z] {
                if self.lanes.iter().filter(|l| l.role == Role::Accel(p, a)).count() != 1 {
                    return Err(Error::Validation(format!("stream layout needs exactly one {p} {a:?} accelerometer")));
                }
            }
            group(&|r| matches!(r, Role::Accel(q, _) if q == p), &format!("{p} accelerometer"), 3)?;
        }
        group(&|r| r == Role::Switch, "footswitch", 1)
    }

    pub fn feature_names() -> Vec<String> {
        FeatureKind::ALL.iter().map(|k| k.name()).collect()
    }

    pub fn lane(&self, label: &str) -> Option<usize> {
        self.by_label.get(label).copied()
    }

    pub fn rate_hz(&self, lane: usize) -> f64 {
        self.lanes[lane].meta.rate_hz
    }

    /// Samples received on `lane` since the last reset.
    pub fn count(&self, lane: usize) -> usize {
        self.lanes[lane].count()
    }

    /// Appends the next sample of `lane`; `value` must be finite.
    pub fn push(&mut self, lane: usize, value: f64) {
        self.lanes[lane].push(value);
    }

    pub fn reset(&mut self) {
        self.lanes.iter_mut().for_each(Lane::reset);
        self.next = 0;
    }

    fn span(&self, k: usize) -> (f64, f64) {
        let start = k as f64 * self.hop_s;
        (start, start + self.window_s)
    }

    fn ready(&self) -> bool {
        let (_, end) = self.span(self.next);
        self.lanes.iter().filter(|l| l.role != Role::Unused).all(|l| l.count() >= l.index_at(end))
    }

    /// Every epoch completed by the samples pushed so far. Epochs with more
    /// than half their features missing are consumed but not returned.
    pub fn poll(&mut self) -> Result<Vec<CausalEpoch>> {
        let mut out = Vec::new();
        while self.ready() {
            let (start_s, end_s) = self.span(self.next);
            let features = self.compute(start_s, end_s)?;
            self.next += 1;
            let (_, next_end) = self.span(self.next);
            for l in &mut self.lanes {
                let i = l.index_at(next_end);
                l.trim(i);
            }
            if 2 * features.iter().filter(|f| f.is_none()).count() <= features.len() {
                out.push(CausalEpoch { start_s, end_s, features });
            }
        }
        Ok(out)
    }

    fn lanes_with(&self, pred: impl Fn(Role) -> bool) -> impl Iterator<Item = &Lane> {
        self.lanes.iter().filter(move |l| pred(l.role))
    }

    fn one(&self, role: Role) -> &Lane {
        self.lanes_with(|r| r == role).next().expect("layout checked at construction")
    }

    fn compute(&self, start_s: f64, end_s: f64) -> Result<Vec<Option<f64>>> {
        let bounds = |l: &Lane| (l.index_at(start_s), l.index_at(end_s));
        let mut out = Vec::with_capacity(FeatureKind::ALL.len());

        let (fz, cz) = (self.one(Role::Fz), self.one(Role::Cz));
        let (s, e) = bounds(fz);
        let ((a, off), (b, _)) = (fz.context(s, e), cz.context(s, e));
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let th = &self.params.theta;
        let power = morlet_band_power(&diff, fz.meta.rate_hz, th.band(), th.n_freqs, th.cycles)?;
        out.push(window_mean(&power[off..].iter().map(|&p| Some(p)).collect::<Vec<_>>()));

        let eog = self.one(Role::EogH);
        let (s, e) = bounds(eog);
        let (lp, off) = eog.context(s, e);
        out.push(if lp.len() >= 1 << SPV_WAVELET_LEVEL {
            let rate = eog.meta.rate_hz;
            let v = velocity_from_lowpassed(&lp, rate)?;
            let slow = classify_slow_phase(&v, rate, self.params.spv_seed)?;
            let dirs = directions_from_velocity(&v, rate);
            let merged: Vec<Option<f64>> = (off..v.len())
                .map(|i| {
                    slow[i].then(|| match dirs[i] {
                        TurnDirection::Clockwise => v[i],
                        TurnDirection::Counterclockwise => -v[i],
                    })
                })
                .collect();
            window_mean(&merged)
        } else {
            None
        });

        let mut per_lead = Vec::new();
        let mut hr_off = 0;
        for lead in self.lanes_with(|r| r == Role::Ecg) {
            let (s, e) = bounds(lead);
            let (ch, off) = lead.channel(s, e)?;
            per_lead.push(lead_heart_rate(&ch)?);
            hr_off = off;
        }
        let n = per_lead[0].len();
        out.push(window_mean(&median_across(&per_lead, n)[hr_off..]));

        for p in Placement::ALL {
            let mut axes = Vec::with_capacity(3);
            let mut off = 0;
            for a in [Axis::X, Axis::Y, Axis::Z] {
                let lane = self.one(Role::Accel(p, a));
                let (s, e) = bounds(lane);
                let (ch, o) = lane.channel(s, e)?;
                axes.push(ch);
                off = o;
            }
            let fi = freeze_index([&axes[0], &axes[1], &axes[2]])?;
            out.push(window_mean(&fi.series.values[off..]));
        }

        let mut switches = Vec::new();
        let mut off = 0;
        for lane in self.lanes_with(|r| r == Role::Switch) {
            let (s, e) = bounds(lane);
            let (ch, o) = lane.channel(s, e)?;
            switches.push(ch);
            off = o;
        }
        let refs: Vec<&Channel> = switches.iter().collect();
        let stride = stride_duration(&refs, &self.switches.keys, &self.switches.thresholds_v)?;
        out.push(window_mean(&stride.values[off..]));
        Ok(out)
    }
}

/// Unlabeled epochs of a recording from the causal extractor, pushed through
/// in hop-sized blocks. This is the offline counterpart of [`StreamDetector`].
pub fn causal_epochs(
    rec: &Recording,
    switches: &SubjectSwitches,
    params: &FeatureParams,
    window_s: f64,
    overlap: f64,
) -> Result<EpochDataset> {
    let mut ex = CausalExtractor::new(&Sidecar::of(rec).channels, switches, params, window_s, overlap)?;
    let mut ds = EpochDataset::new(CausalExtractor::feature_names(), window_s);
    let mut cursor = vec![0usize; rec.channels.len()];
    for block in 1.. {
        let t_hi = block as f64 * ex.hop_s;
        let mut done = true;
        for (lane, c) in rec.channels.iter().enumerate() {
            let hi = ((t_hi * c.rate_hz).round() as usize).min(c.samples.len());
            for &v in &c.samples[cursor[lane]..hi] {
                ex.push(lane, v);
            }
            cursor[lane] = hi;
            done &= hi == c.samples.len();
        }
        ds.epochs.extend(ex.poll()?.into_iter().map(|e| Epoch {
            subject_id: rec.subject_id.clone(),
            start_s: e.start_s,
            features: e.features,
            label: EpochLabel::Normal,
        }));
        if done {
            break;
        }
    }
    Ok(ds)
}

/// One input line of the stream protocol. A missing or null `value` is
/// treated like NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSample {
    pub t: f64,
    pub channel: String,
    #[serde(default)]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StreamEvent {
    Epoch { t_epoch_end: f64, score: f64, detected: bool },
    Gap { gap: bool, t: f64 },
}

/// Counters kept by the detector. Latency is wall-clock compute time from
/// the sample that closed an epoch to its emission.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StreamStats {
    pub samples: u64,
    pub unknown_channel: u64,
    pub late: u64,
    pub replaced_non_finite: u64,
    pub held: u64,
    pub epochs: u64,
    pub detections: u64,
    pub gaps: u64,
    pub max_latency_s: f64,
}

/// Sequential streaming detector. Samples are placed on each channel's clock
/// by their timestamp relative to the first sample seen. Late or duplicate
/// samples are dropped, non-finite values repeat the channel's last finite
/// value, short holes are filled by holding that value, and a hole longer
/// than one epoch window resets all state and emits a gap event.
#[derive(Debug, Clone)]
pub struct StreamDetector {
    extractor: CausalExtractor,
    model: DetectorModel,
    tau: f64,
    gap_s: f64,
    origin: Option<f64>,
    last: Vec<Option<f64>>,
    stats: StreamStats,
}

impl StreamDetector {
    pub fn new(model: DetectorModel, extractor: CausalExtractor, tau: f64) -> Result<Self> {
        if model.input_features != CausalExtractor::feature_names() {
            return Err(Error::Validation(format!(
                "model expects features {:?}, the stream produces {:?}",
                model.input_features,
                CausalExtractor::feature_names()
            )));
        }
        if !tau.is_finite() {
            return Err(Error::param("tau", format!("{tau} is not finite")));
        }
        if model.feature_mode != FeatureMode::Causal {
            log::warn!("model was trained on zero-phase features; streaming scores will not match its evaluation");
        }
        let n = extractor.lanes.len();
        Ok(StreamDetector {
            gap_s: extractor.window_s,
            extractor,
            model,
            tau,
            origin: None,
            last: vec![None; n],
            stats: StreamStats::default(),
        })
    }

    pub fn stats(&self) -> &StreamStats {
        &self.stats
    }

    fn reset(&mut self) {
        self.extractor.reset();
        self.last.iter_mut().for_each(|v| *v = None);
    }

    pub fn push(&mut self, sample: &StreamSample) -> Result<Vec<StreamEvent>> {
        self.stats.samples += 1;
        let Some(lane) = self.extractor.lane(&sample.channel) else {
            self.stats.unknown_channel += 1;
            return Ok(Vec::new());
        };
        if !sample.t.is_finite() {
            self.stats.late += 1;
            return Ok(Vec::new());
        }
        let mut events = Vec::new();
        let origin = *self.origin.get_or_insert(sample.t);
        let rate = self.extractor.rate_hz(lane);
        let rel = ((sample.t - origin) * rate).round();
        let count = self.extractor.count(lane);
        if rel < count as f64 {
            self.stats.late += 1;
            return Ok(events);
        }
        let value = match sample.value {
            Some(v) if v.is_finite() => v,
            _ => {
                self.stats.replaced_non_finite += 1;
                self.last[lane].unwrap_or(0.0)
            }
        };
        let missing = rel as usize - count;
        if missing as f64 / rate > self.gap_s {
            self.reset();
            self.origin = Some(sample.t);
            self.stats.gaps += 1;
            events.push(StreamEvent::Gap { gap: true, t: sample.t });
        } else if missing > 0 {
            let hold = self.last[lane].unwrap_or(value);
            for _ in 0..missing {
                self.extractor.push(lane, hold);
            }
            self.stats.held += missing as u64;
        }
        if sample.value.is_some_and(f64::is_finite) {
            self.last[lane] = Some(value);
        }
        self.extractor.push(lane, value);

        let started = Instant::now();
        let epochs = self.extractor.poll()?;
        let origin = self.origin.unwrap_or(origin);
        for e in epochs {
            let score = self.model.score_row(&e.features)?;
            let detected = score >= self.tau;
            self.stats.epochs += 1;
            self.stats.detections += u64::from(detected);
            events.push(StreamEvent::Epoch { t_epoch_end: origin + e.end_s, score, detected });
        }
        if events.iter().any(|e| matches!(e, StreamEvent::Epoch { .. })) {
            self.stats.max_latency_s = self.stats.max_latency_s.max(started.elapsed().as_secs_f64());
        }
        Ok(events)
    }

    /// Runs the newline-delimited JSON protocol until `input` ends, flushing
    /// after every event.
    pub fn run<R: BufRead, W: Write>(&mut self, input: R, mut output: W) -> Result<()> {
        let io = |e| Error::io("<stream>", e);
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let sample: StreamSample = serde_json::from_str(&line)
                .map_err(|e| Error::Validation(format!("stream input line {}: {e}", lineno + 1)))?;
            for event in self.push(&sample)? {
                serde_json::to_writer(&mut output, &event)?;
                output.write_all(b"\n").map_err(io)?;
                output.flush().map_err(io)?;
            }
        }
        Ok(())
    }
}

/// The samples of a recording in timestamp order, ties broken by channel
/// order: the feed a live acquisition of it would produce.
pub fn replay_feed(rec: &Recording) -> impl Iterator<Item = StreamSample> + '_ {
    let mut cursor = vec![0usize; rec.channels.len()];
    std::iter::from_fn(move || {
        let (lane, t) = rec
            .channels
            .iter()
            .enumerate()
            .filter(|(i, c)| cursor[*i] < c.samples.len())
            .map(|(i, c)| (i, cursor[i] as f64 / c.rate_hz))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        let c = &rec.channels[lane];
        let value = c.samples[cursor[lane]];
        cursor[lane] += 1;
        Some(StreamSample { t, channel: c.label.clone(), value: Some(value) })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{train_rusboost, BoostParams};
    use crate::pipeline::CONSENSUS_RATER;
    use crate::evaluate::{label_epochs, FOG_BUFFER_S, EPOCH_OVERLAP, EPOCH_WINDOW_S};
    use crate::synth::{generate_subject, SynthConfig, SyntheticSubject};

    fn subject() -> SyntheticSubject {
        let cfg = SynthConfig { n_subjects: 1, task_duration_s: 60.0, tasks_per_subject: 1, ..SynthConfig::default() };
        generate_subject(&cfg, 0).unwrap()
    }

    fn extractor(s: &SyntheticSubject) -> CausalExtractor {
        let metas = Sidecar::of(&s.recording).channels;
        CausalExtractor::new(&metas, &s.switches, &FeatureParams::default(), EPOCH_WINDOW_S, EPOCH_OVERLAP).unwrap()
    }

    fn offline(s: &SyntheticSubject) -> EpochDataset {
        causal_epochs(&s.recording, &s.switches, &FeatureParams::default(), EPOCH_WINDOW_S, EPOCH_OVERLAP).unwrap()
    }

    fn model(s: &SyntheticSubject, ds: &EpochDataset) -> DetectorModel {
        let ann = s.annotations.iter().find(|a| a.rater_id == CONSENSUS_RATER).unwrap();
        let labeled = label_epochs(ds, &s.recording.subject_id, ann, FOG_BUFFER_S);
        let p = BoostParams { n_rounds: 10, ..BoostParams::default() };
        train_rusboost(&labeled, &[0, 1, 3, 4, 5, 6, 7], &p, FeatureMode::Causal).unwrap()
    }

    fn epochs_of(events: &[StreamEvent]) -> Vec<(f64, f64)> {
        events
            .iter()
            .filter_map(|e| match e {
                StreamEvent::Epoch { t_epoch_end, score, .. } => Some((*t_epoch_end, *score)),
                StreamEvent::Gap { .. } => None,
            })
            .collect()
    }

    fn run(det: &mut StreamDetector, feed: impl Iterator<Item = StreamSample>) -> Vec<StreamEvent> {
        let mut events = Vec::new();
        for s in feed {
            events.extend(det.push(&s).unwrap());
        }
        events
    }

    #[test]
    fn stream_scores_match_offline_causal_pipeline() {
        let s = subject();
        let ds = offline(&s);
        assert!(ds.len() > 40, "{} epochs", ds.len());
        let m = model(&s, &ds);
        let expected = m.predict_scores(&ds).unwrap();
        let mut det = StreamDetector::new(m, extractor(&s), 0.5).unwrap();
        let got = epochs_of(&run(&mut det, replay_feed(&s.recording)));
        assert_eq!(got.len(), expected.len());
        for ((t, score), (e, want)) in got.iter().zip(ds.epochs.iter().zip(&expected)) {
            assert!((t - e.end_s(EPOCH_WINDOW_S)).abs() < 1e-9);
            assert!((score - want).abs() <= 1e-9, "{score} vs {want} at {t}");
        }
    }

    #[test]
    fn future_nan_never_changes_past_events() {
        let s = subject();
        let m = model(&s, &offline(&s));
        let cut = 31.0;
        let clean = run(&mut StreamDetector::new(m.clone(), extractor(&s), 0.5).unwrap(), replay_feed(&s.recording));
        let poisoned = replay_feed(&s.recording).map(|mut x| {
            if x.t > cut {
                x.value = None;
            }
            x
        });
        let dirty = run(&mut StreamDetector::new(m, extractor(&s), 0.5).unwrap(), poisoned);
        let before = |ev: &[StreamEvent]| epochs_of(ev).into_iter().filter(|(t, _)| *t <= cut).collect::<Vec<_>>();
        assert!(!before(&clean).is_empty());
        assert_eq!(before(&clean), before(&dirty));
        assert_ne!(epochs_of(&clean), epochs_of(&dirty));
    }

    #[test]
    fn dropout_emits_one_gap_then_recovers() {
        let s = subject();
        let m = model(&s, &offline(&s));
        let mut det = StreamDetector::new(m, extractor(&s), 0.5).unwrap();
        let feed = replay_feed(&s.recording).filter(|x| !(20.0..25.0).contains(&x.t));
        let events = run(&mut det, feed);
        let gaps: Vec<f64> = events
            .iter()
            .filter_map(|e| match e {
                StreamEvent::Gap { t, .. } => Some(*t),
                _ => None,
            })
            .collect();
        assert_eq!(gaps, vec![25.0]);
        let after: Vec<f64> = epochs_of(&events).into_iter().map(|(t, _)| t).filter(|&t| t > 25.0).collect();
        assert!((after[0] - (25.0 + EPOCH_WINDOW_S)).abs() < 1e-9, "{after:?}");
        assert!(after.len() > 20);
    }

    #[test]
    fn short_holes_and_late_samples_are_absorbed() {
        let s = subject();
        let m = model(&s, &offline(&s));
        let mut det = StreamDetector::new(m, extractor(&s), 0.5).unwrap();
        let mut feed: Vec<StreamSample> =
            replay_feed(&s.recording).take_while(|x| x.t < 12.0).filter(|x| !(5.0..5.5).contains(&x.t)).collect();
        let dup = feed[100].clone();
        feed.push(dup);
        let events = run(&mut det, feed.into_iter());
        assert!(events.iter().all(|e| matches!(e, StreamEvent::Epoch { .. })));
        assert_eq!(det.stats().late, 1);
        assert!(det.stats().held > 0);
    }

    #[test]
    fn protocol_round_trip() {
        let s = subject();
        let m = model(&s, &offline(&s));
        let mut input = String::new();
        for x in replay_feed(&s.recording).take_while(|x| x.t < 8.0) {
            input.push_str(&serde_json::to_string(&x).unwrap());
            input.push('\n');
        }
        input.push_str("{\"t\": 8.0, \"channel\": \"EEG_Fz\", \"value\": null}\n");
        let mut out = Vec::new();
        let mut det = StreamDetector::new(m, extractor(&s), 0.5).unwrap();
        det.run(input.as_bytes(), &mut out).unwrap();
        let lines: Vec<StreamEvent> =
            String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert!(lines.len() >= 3);
        assert_eq!(lines.len() as u64, det.stats().epochs);
        assert_eq!(det.stats().replaced_non_finite, 1);
        let gap: StreamEvent = serde_json::from_str(r#"{"gap": true, "t": 3.5}"#).unwrap();
        assert_eq!(gap, StreamEvent::Gap { gap: true, t: 3.5 });
        assert_eq!(
            serde_json::to_string(&StreamEvent::Epoch { t_epoch_end: 2.56, score: 0.25, detected: false }).unwrap(),
            r#"{"t_epoch_end":2.56,"score":0.25,"detected":false}"#
        );
    }

    #[test]
    fn layout_without_eog_is_rejected() {
        let s = subject();
        let metas: Vec<ChannelMeta> = Sidecar::of(&s.recording)
            .channels
            .into_iter()
            .filter(|m| !matches!(m.kind, ChannelKind::Eog { .. }))
            .collect();
        let err = CausalExtractor::new(&metas, &s.switches, &FeatureParams::default(), 2.56, 0.5).unwrap_err();
        assert!(err.to_string().contains("horizontal EOG"), "{err}");
    }
}
