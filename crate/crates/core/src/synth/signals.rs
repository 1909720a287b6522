use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::timeline::{Motion, Timeline};
use super::{sample_normal, SynthConfig};

pub const EEG_EOG_RATE_HZ: f64 = 500.0;
pub const BODY_RATE_HZ: f64 = 512.0;
/// Fraction of the stride spent in stance.
const STANCE: f64 = 0.6;
const FOOTSWITCH_HIGH_V: f64 = 3.3;
const EOG_UV_PER_DEG: f64 = 20.0;
/// Nystagmus quick phases start when the eye leaves this range.
const EYE_LIMIT_DEG: f64 = 12.0;
const QUICK_PHASE_DPS: f64 = 400.0;
const SPV_RECOVERY_S: f64 = 0.5;
const TREMBLE_WANDER_TAU_S: f64 = 5.0;
/// Standard deviation of the log tremble amplitude over time.
const TREMBLE_WANDER_SD: f64 = 0.1;

/// Per-subject physiology drawn once per subject.
#[derive(Debug, Clone)]
pub struct Subject {
    pub turn_velocity_dps: f64,
    pub turn_offset: f64,
    pub vor_gain: f64,
    pub stride_s: f64,
    pub loco_gain: f64,
    pub tremble_gain: f64,
    pub tremble_hz: f64,
    pub heart_rate_bpm: f64,
    pub eeg_gain: f64,
}

impl Subject {
    pub fn draw(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let jitter = |rng: &mut ChaCha8Rng, spread: f64| 1.0 + rng.random_range(-spread..spread);
        let turn_velocity_dps = cfg.turn_velocity_dps * jitter(rng, 0.1);
        let turn_offset = rng.random_range(0.0..1.0);
        let vor_gain = rng.random_range(0.5..0.7);
        let stride_s = rng.random_range(1.0..1.2);
        // Tremble tracks locomotion vigor closely; the freeze index is their
        // power ratio, so independent gains would scatter its baseline.
        let loco_gain = jitter(rng, 0.1);
        let tremble_gain = loco_gain * jitter(rng, 0.02);
        Subject {
            turn_velocity_dps,
            turn_offset,
            vor_gain,
            stride_s,
            loco_gain,
            tremble_gain,
            tremble_hz: rng.random_range(4.5..6.5),
            heart_rate_bpm: rng.random_range(65.0..85.0),
            eeg_gain: jitter(rng, 0.2),
        }
    }
}

/// Unit-variance Ornstein-Uhlenbeck sequence with time constant `tau` samples.
pub fn ou_process(n: usize, tau: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a = (-1.0 / tau).exp();
    let b = (1.0 - a * a).sqrt();
    let mut x = sample_normal(rng);
    (0..n)
        .map(|_| {
            let v = x;
            x = a * x + b * sample_normal(rng);
            v
        })
        .collect()
}

pub fn grid(duration_s: f64, rate_hz: f64) -> Vec<f64> {
    let n = (duration_s * rate_hz).round() as usize;
    (0..n).map(|i| i as f64 / rate_hz).collect()
}

pub fn quantize(x: &mut [f64], step: f64) {
    let inv = 1.0 / step;
    x.iter_mut().for_each(|v| *v = (*v * inv).round() / inv);
}

/// Flat-topped alternating head-turn velocity in deg/s.
pub fn turn_velocity(t: f64, cfg: &SynthConfig, s: &Subject) -> f64 {
    const KAPPA: f64 = 3.0;
    let arg = 2.0 * PI * (t / cfg.turn_period_s + s.turn_offset);
    s.turn_velocity_dps * (KAPPA * arg.sin()).tanh() / KAPPA.tanh()
}

/// Horizontal and vertical EOG in volts.
pub fn eog(cfg: &SynthConfig, s: &Subject, tl: &Timeline, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let t = grid(tl.duration_s, EEG_EOG_RATE_HZ);
    let dt = 1.0 / EEG_EOG_RATE_HZ;
    let fx = &cfg.effects;
    let noise_v = cfg.noise.eog_uv * 1e-6;
    let mut eye: f64 = 0.0;
    let mut quick: f64 = 0.0;
    let mut drift = 0.0;
    let mut h = Vec::with_capacity(t.len());
    for &ti in &t {
        let env = tl.spv_envelope(ti, fx, SPV_RECOVERY_S);
        let slow = -s.vor_gain * turn_velocity(ti, cfg, s) * env;
        if quick == 0.0 && eye.abs() > EYE_LIMIT_DEG && eye * slow > 0.0 {
            quick = -eye.signum() * QUICK_PHASE_DPS;
        }
        if quick != 0.0 {
            eye += quick * dt;
            if eye * quick.signum() >= 0.5 * EYE_LIMIT_DEG {
                quick = 0.0;
            }
        } else {
            eye += slow * dt;
        }
        // slow electrode drift, removed downstream by the wavelet baseline
        drift = 0.9995 * drift + 2e-6 * sample_normal(rng);
        h.push(eye * EOG_UV_PER_DEG * 1e-6 + drift + noise_v * sample_normal(rng));
    }
    let mut next_blink = rng.random_range(1.0..6.0);
    let mut v: Vec<f64> = t.iter().map(|_| noise_v * sample_normal(rng)).collect();
    while next_blink < tl.duration_s {
        let amp = rng.random_range(200e-6..400e-6);
        for (vi, &ti) in v.iter_mut().zip(&t) {
            let z = (ti - next_blink) / 0.05;
            if z.abs() < 5.0 {
                *vi += amp * (-0.5 * z * z).exp();
            }
        }
        next_blink += rng.random_range(2.0..6.0);
    }
    quantize(&mut h, 1e-8);
    quantize(&mut v, 1e-8);
    (h, v)
}

/// Gait phase in strides for each sample; frozen while stopped.
pub fn gait_phase(t: &[f64], cfg: &SynthConfig, s: &Subject, tl: &Timeline) -> Vec<f64> {
    let dt = t.get(1).copied().unwrap_or(1.0);
    let mut phase = 0.0;
    t.iter()
        .map(|&ti| {
            let p = phase;
            phase += match tl.motion_at(ti) {
                Motion::Normal => dt / s.stride_s,
                Motion::Freezing => dt / (s.stride_s * cfg.effects.stride_inflation),
                Motion::Stopped => 0.0,
            };
            p
        })
        .collect()
}

/// Footswitch voltages: `[foot][switch]`, switches 0 heel, 1 toe, 2 first
/// and 3 fifth metatarsal.
pub fn footswitches(phase: &[f64], cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> [[Vec<f64>; 4]; 2] {
    const SPANS: [(f64, f64); 4] = [(0.0, 0.35), (0.55, 1.0), (0.15, 0.85), (0.2, 0.8)];
    let mut out: [[Vec<f64>; 4]; 2] = Default::default();
    for (foot, offset) in [(0usize, 0.0), (1, 0.5)] {
        for (sw, &(a, b)) in SPANS.iter().enumerate() {
            let mut v: Vec<f64> = phase
                .iter()
                .map(|&p| {
                    let u = (p + offset).fract() / STANCE;
                    let on = (a..b).contains(&u);
                    (if on { FOOTSWITCH_HIGH_V } else { 0.0 }) + cfg.noise.footswitch_v * sample_normal(rng)
                })
                .collect();
            quantize(&mut v, 1e-3);
            out[foot][sw] = v;
        }
    }
    out
}

/// Three accelerometer axes (in g) for each placement, in `Placement::ALL`
/// order.
pub fn accelerometers(
    t: &[f64],
    phase: &[f64],
    cfg: &SynthConfig,
    s: &Subject,
    tl: &Timeline,
    rng: &mut ChaCha8Rng,
) -> Vec<[Vec<f64>; 3]> {
    let fx = &cfg.effects;
    let (loco_scale, trem_scale) = fx.freezing_amplitudes();
    let regime: Vec<(f64, f64)> = t
        .iter()
        .map(|&ti| match tl.motion_at(ti) {
            Motion::Normal => (1.0, 1.0),
            Motion::Freezing => (loco_scale, trem_scale),
            Motion::Stopped => (0.05, 0.05),
        })
        .collect();
    // slow wander of tremble vigor shared by all placements
    let wander = ou_process(t.len(), TREMBLE_WANDER_TAU_S * BODY_RATE_HZ, rng);
    // placement: (leg phase offset, locomotion amplitude, tremble amplitude, gravity direction)
    let placements = [
        (0.0, 0.15, 0.08, [0.08, 0.12, 0.99]),
        (0.5, 0.15, 0.08, [-0.08, 0.12, 0.99]),
        (0.0, 0.27, 0.12, [0.15, -0.05, 0.98]),
        (0.5, 0.27, 0.12, [-0.15, -0.05, 0.98]),
    ];
    let mut out = Vec::with_capacity(placements.len());
    for (leg, loco_amp, trem_amp, g) in placements {
        let norm = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        let g = g.map(|c: f64| c / norm.sqrt());
        let psi = rng.random_range(0.0..2.0 * PI);
        let mut tremble_phase = psi;
        let mut axes: [Vec<f64>; 3] = Default::default();
        for i in 0..t.len() {
            let p = 2.0 * PI * (phase[i] + leg);
            let loco = s.loco_gain * loco_amp * (p.sin() + 0.6 * (2.0 * p).sin());
            tremble_phase += 2.0 * PI * s.tremble_hz / BODY_RATE_HZ + 0.002 * sample_normal(rng);
            let trem = s.tremble_gain * trem_amp * (TREMBLE_WANDER_SD * wander[i]).exp() * tremble_phase.sin();
            let (lf, tf) = regime[i];
            let (l, tr) = (lf * loco, tf * trem);
            let dyn_ = [0.3 * l + 0.5 * tr, 0.2 * l + 0.3 * tr, l + tr];
            for a in 0..3 {
                axes[a].push(g[a] + dyn_[a] + cfg.noise.accel_g * sample_normal(rng));
            }
        }
        axes.iter_mut().for_each(|ax| quantize(ax, 1e-4));
        out.push(axes);
    }
    out
}

/// Three ECG leads in volts from a sum-of-Gaussians beat template.
pub fn ecg(t: &[f64], cfg: &SynthConfig, s: &Subject, tl: &Timeline, rng: &mut ChaCha8Rng) -> [Vec<f64>; 3] {
    // (offset s, width s, amplitude mV)
    const WAVES: [(f64, f64, f64); 5] =
        [(-0.2, 0.025, 0.12), (-0.03, 0.01, -0.1), (0.0, 0.012, 1.0), (0.03, 0.01, -0.25), (0.3, 0.05, 0.3)];
    const LEADS: [f64; 3] = [1.0, 1.4, 0.6];
    let mut beats = Vec::new();
    let mut tb = rng.random_range(0.2..0.8);
    while tb < tl.duration_s + 1.0 {
        beats.push(tb);
        let effect = if tl.in_fog(tb) { cfg.effects.hr_effect_bpm } else { 0.0 };
        let bpm = s.heart_rate_bpm + 3.0 * (2.0 * PI * 0.25 * tb).sin() + effect + 0.8 * sample_normal(rng);
        tb += 60.0 / bpm.max(30.0);
    }
    let mut clean = vec![0.0; t.len()];
    let rate = BODY_RATE_HZ;
    for &b in &beats {
        for &(off, w, amp) in &WAVES {
            let c = b + off;
            let lo = (((c - 5.0 * w) * rate).floor().max(0.0)) as usize;
            let hi = (((c + 5.0 * w) * rate).ceil().max(0.0) as usize).min(t.len());
            for (i, v) in clean.iter_mut().enumerate().take(hi).skip(lo) {
                let z = (t[i] - c) / w;
                *v += amp * (-0.5 * z * z).exp();
            }
        }
    }
    let wander_phase = rng.random_range(0.0..2.0 * PI);
    let mut out: [Vec<f64>; 3] = Default::default();
    for (l, scale) in LEADS.iter().enumerate() {
        let mut v: Vec<f64> = clean
            .iter()
            .zip(t)
            .map(|(&c, &ti)| {
                let wander = 0.1 * (2.0 * PI * 0.3 * ti + wander_phase + l as f64).sin();
                (scale * c + wander + cfg.noise.ecg_mv * sample_normal(rng)) * 1e-3
            })
            .collect();
        quantize(&mut v, 1e-7);
        out[l] = v;
    }
    out
}

/// Fz and Cz in volts: shared and independent 1/f-like noise plus a theta
/// rhythm at Fz.
pub fn eeg(cfg: &SynthConfig, s: &Subject, tl: &Timeline, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let t = grid(tl.duration_s, EEG_EOG_RATE_HZ);
    let sd = cfg.noise.eeg_uv * 1e-6 * s.eeg_gain;
    let ar = 0.98;
    let innov = (1.0f64 - ar * ar).sqrt();
    let (mut c, mut a, mut b) = (0.0, 0.0, 0.0);
    let theta_hz = rng.random_range(5.0..6.5);
    let mut fz = Vec::with_capacity(t.len());
    let mut cz = Vec::with_capacity(t.len());
    let mut theta_amp: f64 = 1.0;
    for &ti in &t {
        c = ar * c + innov * sample_normal(rng);
        a = ar * a + innov * sample_normal(rng);
        b = ar * b + innov * sample_normal(rng);
        theta_amp = (0.999 * theta_amp + 0.001 * (1.0 + 0.5 * sample_normal(rng))).max(0.0);
        let effect = if tl.in_fog(ti) { 1.0 + cfg.effects.theta_effect } else { 1.0 };
        let theta = 0.5 * sd * theta_amp * effect * (2.0 * PI * theta_hz * ti).sin();
        fz.push(sd * (2.0 * c + a) + theta);
        cz.push(sd * (1.8 * c + b));
    }
    quantize(&mut fz, 1e-8);
    quantize(&mut cz, 1e-8);
    (fz, cz)
}
