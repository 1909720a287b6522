//! Butterworth IIR filters as cascaded second-order sections.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FilterKind {
    Lowpass { cutoff_hz: f64 },
    Bandpass { low_hz: f64, high_hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Forward-backward application, no group delay.
    ZeroPhase,
    /// Single forward pass from a zero initial state.
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// Butterworth prototype order; a band-pass has twice as many poles.
    pub order: usize,
    pub phase: Phase,
}

impl FilterSpec {
    pub fn lowpass(cutoff_hz: f64, order: usize, phase: Phase) -> Self {
        FilterSpec {
            kind: FilterKind::Lowpass { cutoff_hz },
            order,
            phase,
        }
    }

    pub fn bandpass(low_hz: f64, high_hz: f64, order: usize, phase: Phase) -> Self {
        FilterSpec {
            kind: FilterKind::Bandpass { low_hz, high_hz },
            order,
            phase,
        }
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }
}

/// One biquad: `b = [b0, b1, b2]`, `a = [1, a1, a2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Section {
    fn response(&self, z: Complex<f64>) -> Complex<f64> {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b[0] + self.b[1] * zi + self.b[2] * zi2) / (self.a[0] + self.a[1] * zi + self.a[2] * zi2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Section>,
}

impl Sos {
    pub fn butterworth(kind: FilterKind, order: usize, rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::param("order", "must be >= 1"));
        }
        let nyquist = rate_hz / 2.0;
        let check = |f: f64| -> Result<()> {
            if !(f.is_finite() && f > 0.0 && f < nyquist) {
                return Err(Error::param(
                    "cutoff_hz",
                    format!("corner {f} Hz outside (0, {nyquist}) Hz"),
                ));
            }
            Ok(())
        };
        let fs2 = 2.0 * rate_hz;
        let warp = |f: f64| fs2 * (PI * f / rate_hz).tan();
        let bilinear = |s: Complex<f64>| (Complex::new(fs2, 0.0) + s) / (Complex::new(fs2, 0.0) - s);
        let proto: Vec<Complex<f64>> = (0..order)
            .map(|k| Complex::from_polar(1.0, PI * (2 * k + order + 1) as f64 / (2 * order) as f64))
            .collect();

        let (poles, zero_b, ref_z): (Vec<Complex<f64>>, [f64; 3], Complex<f64>) = match kind {
            FilterKind::Lowpass { cutoff_hz } => {
                check(cutoff_hz)?;
                let wc = warp(cutoff_hz);
                (
                    proto.iter().map(|p| bilinear(p * wc)).collect(),
                    [1.0, 2.0, 1.0],
                    Complex::new(1.0, 0.0),
                )
            }
            FilterKind::Bandpass { low_hz, high_hz } => {
                check(low_hz)?;
                check(high_hz)?;
                if low_hz >= high_hz {
                    return Err(Error::param(
                        "cutoff_hz",
                        format!("band-pass corners must be ordered, got {low_hz}..{high_hz}"),
                    ));
                }
                let (w1, w2) = (warp(low_hz), warp(high_hz));
                let w0sq = w1 * w2;
                let bw = w2 - w1;
                let mut poles = Vec::with_capacity(2 * order);
                for p in &proto {
                    let pb = p * bw;
                    let disc = (pb * pb - 4.0 * w0sq).sqrt();
                    poles.push(bilinear((pb + disc) / 2.0));
                    poles.push(bilinear((pb - disc) / 2.0));
                }
                let w0_digital = 2.0 * (w0sq.sqrt() / fs2).atan();
                (poles, [1.0, 0.0, -1.0], Complex::from_polar(1.0, w0_digital))
            }
        };

        let mut sections = Vec::new();
        let mut real_poles = Vec::new();
        for p in &poles {
            if p.im > 1e-12 {
                sections.push(Section {
                    b: zero_b,
                    a: [1.0, -2.0 * p.re, p.norm_sqr()],
                });
            } else if p.im.abs() <= 1e-12 {
                real_poles.push(p.re);
            }
        }
        for pair in real_poles.chunks(2) {
            match *pair {
                [p, q] => sections.push(Section {
                    b: zero_b,
                    a: [1.0, -(p + q), p * q],
                }),
                [p] => {
                    // odd-order low-pass: first-order section with its zero at -1
                    sections.push(Section {
                        b: [1.0, 1.0, 0.0],
                        a: [1.0, -p, 0.0],
                    })
                }
                _ => unreachable!(),
            }
        }

        let gain: f64 = sections.iter().map(|s| s.response(ref_z)).product::<Complex<f64>>().norm();
        let per_section = gain.powf(-1.0 / sections.len() as f64);
        for s in &mut sections {
            for b in &mut s.b {
                *b *= per_section;
            }
        }
        Ok(Sos { sections })
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, rate_hz: f64) -> f64 {
        let z = Complex::from_polar(1.0, 2.0 * PI * freq_hz / rate_hz);
        self.sections
            .iter()
            .map(|s| s.response(z))
            .product::<Complex<f64>>()
            .norm()
    }

    pub fn filter_causal(&self, x: &[f64]) -> Vec<f64> {
        let mut state = SosState::new(self);
        x.iter().map(|&v| state.process(self, v)).collect()
    }

    /// Forward-backward filtering with odd-extension padding and steady-state
    /// initial conditions.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.step_state();
        let mut state = SosState::scaled(&zi, ext[0]);
        let mut y: Vec<f64> = ext.iter().map(|&v| state.process(self, v)).collect();
        y.reverse();
        let mut state = SosState::scaled(&zi, y[0]);
        for v in y.iter_mut() {
            *v = state.process(self, *v);
        }
        y.reverse();
        y[pad..pad + n].to_vec()
    }

    /// Section states in steady state for a unit-step input.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut level = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
                let z2 = s.b[2] * level - s.a[2] * g * level;
                let z1 = s.b[1] * level - s.a[1] * g * level + z2;
                level *= g;
                [z1, z2]
            })
            .collect()
    }
}

/// Transposed direct-form II state, one pair per section. Feeding samples one
/// at a time gives bit-identical output to [`Sos::filter_causal`].
#[derive(Debug, Clone, PartialEq)]
pub struct SosState {
    z: Vec<[f64; 2]>,
}

impl SosState {
    pub fn new(sos: &Sos) -> Self {
        SosState {
            z: vec![[0.0; 2]; sos.sections.len()],
        }
    }

    fn scaled(zi: &[[f64; 2]], by: f64) -> Self {
        SosState {
            z: zi.iter().map(|z| [z[0] * by, z[1] * by]).collect(),
        }
    }

    #[inline]
    pub fn process(&mut self, sos: &Sos, x: f64) -> f64 {
        let mut v = x;
        for (s, z) in sos.sections.iter().zip(self.z.iter_mut()) {
            let y = s.b[0] * v + z[0];
            z[0] = s.b[1] * v - s.a[1] * y + z[1];
            z[1] = s.b[2] * v - s.a[2] * y;
            v = y;
        }
        v
    }

    pub fn reset(&mut self) {
        self.z.iter_mut().for_each(|z| *z = [0.0; 2]);
    }
}

pub fn apply_filter(x: &[f64], rate_hz: f64, spec: &FilterSpec) -> Result<Vec<f64>> {
    if x.len() <= 3 * spec.order {
        return Err(Error::param(
            "signal",
            format!("length {} must exceed 3 x order ({})", x.len(), 3 * spec.order),
        ));
    }
    let sos = Sos::butterworth(spec.kind, spec.order, rate_hz)?;
    Ok(match spec.phase {
        Phase::ZeroPhase => sos.filtfilt(x),
        Phase::Causal => sos.filter_causal(x),
    })
}
