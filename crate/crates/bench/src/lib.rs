//! Shared fixtures for the benchmarks.

use fogsense::synth::{generate_subject, SynthConfig, SyntheticSubject};

/// One synthetic subject with a single one-minute task.
pub fn short_subject() -> SyntheticSubject {
    let cfg = SynthConfig { n_subjects: 1, tasks_per_subject: 1, task_duration_s: 60.0, ..SynthConfig::default() };
    generate_subject(&cfg, 0).expect("default synthetic settings are valid")
}

/// A deterministic test tone mix: `secs` seconds at `rate_hz`.
pub fn tone_mix(secs: f64, rate_hz: f64) -> Vec<f64> {
    let n = (secs * rate_hz) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate_hz;
            (2.0 * std::f64::consts::PI * 5.0 * t).sin() + 0.5 * (2.0 * std::f64::consts::PI * 1.3 * t).cos()
        })
        .collect()
}
