//! Rational-ratio downsampling with a Kaiser-windowed sinc anti-alias filter.
//!
//! The kernel is evaluated symmetrically around each output instant, so the
//! filter is zero-phase. 512 Hz -> 500 Hz uses the ratio 125/128 with a
//! 125-phase polyphase table.

use super::recording::Channel;
use crate::error::{Error, Result};

/// Half-width of the interpolation kernel, in input samples.
const HALF_TAPS: usize = 32;
const KAISER_BETA: f64 = 7.857; // ~80 dB stopband
/// Anti-alias corner as a fraction of the lower of the two sample rates.
const CUTOFF_FRACTION: f64 = 0.45;
const MAX_PHASES: u64 = 1 << 14;

pub fn resample_channel(ch: &Channel, target_hz: f64) -> Result<Channel> {
    let samples = resample(&ch.samples, ch.rate_hz, target_hz)?;
    Ok(Channel {
        label: ch.label.clone(),
        kind: ch.kind.clone(),
        rate_hz: target_hz,
        samples,
    })
}

pub fn resample(x: &[f64], from_hz: f64, to_hz: f64) -> Result<Vec<f64>> {
    if !(to_hz.is_finite() && to_hz > 0.0) {
        return Err(Error::param("target_hz", format!("must be > 0, got {to_hz}")));
    }
    if to_hz > from_hz {
        return Err(Error::UnsupportedUpsample { from_hz, to_hz });
    }
    if to_hz == from_hz {
        return Ok(x.to_vec());
    }
    let (up, down) = rational_ratio(from_hz, to_hz)?;
    let table = PolyphaseTable::new(up, from_hz, to_hz);

    let n_out = ((x.len() as u64 * up) as f64 / down as f64).round() as usize;
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out as u64 {
        let pos = m * down;
        let base = (pos / up) as i64;
        let phase = (pos % up) as usize;
        let taps = table.phase(phase);
        // taps[k] multiplies x[base - HALF_TAPS + 1 + k]
        let first = base - HALF_TAPS as i64 + 1;
        let mut acc = 0.0;
        for (k, &h) in taps.iter().enumerate() {
            let idx = first + k as i64;
            if idx >= 0 && (idx as usize) < x.len() {
                acc += h * x[idx as usize];
            }
        }
        out.push(acc);
    }
    Ok(out)
}

fn rational_ratio(from_hz: f64, to_hz: f64) -> Result<(u64, u64)> {
    let as_int = |v: f64, name: &'static str| -> Result<u64> {
        let r = v.round();
        if (v - r).abs() > 1e-9 || r < 1.0 {
            return Err(Error::param(name, format!("rate {v} Hz is not a positive integer")));
        }
        Ok(r as u64)
    };
    let (a, b) = (as_int(from_hz, "rate_hz")?, as_int(to_hz, "target_hz")?);
    let g = gcd(a, b);
    let (up, down) = (b / g, a / g);
    if up > MAX_PHASES {
        return Err(Error::param(
            "target_hz",
            format!("ratio {up}/{down} needs too many polyphase branches"),
        ));
    }
    Ok((up, down))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

struct PolyphaseTable {
    taps: Vec<f64>,
}

impl PolyphaseTable {
    fn new(up: u64, from_hz: f64, to_hz: f64) -> Self {
        let cutoff = CUTOFF_FRACTION * from_hz.min(to_hz);
        // Normalized to cycles per input sample, doubled for the sinc argument.
        let wc = 2.0 * cutoff / from_hz;
        let width = 2 * HALF_TAPS;
        let mut taps = Vec::with_capacity(up as usize * width);
        let i0_beta = bessel_i0(KAISER_BETA);
        for phase in 0..up {
            let frac = phase as f64 / up as f64;
            for k in 0..width {
                // distance from the output instant to input sample (first + k)
                let tau = frac + (HALF_TAPS as f64 - 1.0) - k as f64;
                let r = tau / HALF_TAPS as f64;
                let w = if r.abs() >= 1.0 {
                    0.0
                } else {
                    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
                };
                taps.push(wc * sinc(wc * tau) * w);
            }
        }
        PolyphaseTable { taps }
    }

    fn phase(&self, p: usize) -> &[f64] {
        let width = 2 * HALF_TAPS;
        &self.taps[p * width..(p + 1) * width]
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalio::recording::ChannelKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use rustfft::{num_complex::Complex, FftPlanner};
    use std::f64::consts::PI;

    #[test]
    fn identity_is_bitwise_passthrough() {
        let x: Vec<f64> = (0..777).map(|i| (i as f64).sqrt().sin()).collect();
        let ch = Channel::new("a", ChannelKind::Ecg { lead: "I".into() }, 500.0, x.clone()).unwrap();
        let out = resample_channel(&ch, 500.0).unwrap();
        assert_eq!(out.samples, x);
        assert_eq!(out.rate_hz, 500.0);
    }

    #[test]
    fn upsampling_rejected() {
        assert!(matches!(
            resample(&[0.0; 10], 500.0, 512.0),
            Err(Error::UnsupportedUpsample { .. })
        ));
    }

    #[test]
    fn sine_amplitude_preserved() {
        let n = 512 * 10;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 10.0 * i as f64 / 512.0).sin()).collect();
        let y = resample(&x, 512.0, 500.0).unwrap();
        assert_eq!(y.len(), 5000);
        // analytically sampled sine at 500 Hz, away from the zero-padded edges
        for (m, &v) in y.iter().enumerate().skip(100).take(4800) {
            let expected = (2.0 * PI * 10.0 * m as f64 / 500.0).sin();
            assert!((v - expected).abs() < 0.01, "m={m} v={v} expected={expected}");
        }
    }

    #[test]
    fn duration_preserved_within_one_sample() {
        for n in [1usize, 17, 511, 512, 1000, 61440] {
            let y = resample(&vec![1.0; n], 512.0, 500.0).unwrap();
            let d_in = n as f64 / 512.0;
            let d_out = y.len() as f64 / 500.0;
            assert!((d_in - d_out).abs() <= 1.0 / 500.0 + 1e-12);
        }
    }

    #[test]
    fn energy_above_output_nyquist_is_rejected() {
        // White noise restricted (via FFT) to 250..256 Hz at 512 Hz.
        let n = 512 * 20;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut spec: Vec<Complex<f64>> = (0..n)
            .map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut spec);
        for (k, c) in spec.iter_mut().enumerate() {
            let f = k.min(n - k) as f64 * 512.0 / n as f64;
            if f < 250.0 {
                *c = Complex::new(0.0, 0.0);
            }
        }
        planner.plan_fft_inverse(n).process(&mut spec);
        let x: Vec<f64> = spec.iter().map(|c| c.re / n as f64).collect();
        let y = resample(&x, 512.0, 500.0).unwrap();
        let e_in: f64 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let e_out: f64 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        let db = 10.0 * (e_out / e_in).log10();
        assert!(db < -40.0, "leakage {db} dB");
    }

    #[test]
    fn bessel_matches_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-13);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_45).abs() < 1e-10);
    }

    proptest::proptest! {
        #[test]
        fn resample_is_linear(
            seed in 0u64..1000,
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..600).map(|_| StandardNormal.sample(&mut rng)).collect();
            let y: Vec<f64> = (0..600).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let rx = resample(&x, 512.0, 500.0).unwrap();
            let ry = resample(&y, 512.0, 500.0).unwrap();
            let rm = resample(&mix, 512.0, 500.0).unwrap();
            let scale = rm.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..rm.len() {
                let lin = alpha * rx[i] + beta * ry[i];
                proptest::prop_assert!((rm[i] - lin).abs() <= 1e-9 * scale);
            }
        }
    }
}
