//! Complex Morlet wavelet power, computed by frequency-domain convolution.
//!
//! Each wavelet is the analytic Gaussian `2 exp(-(nu - f)^2 / (2 sigma_f^2))`
//! with `sigma_f = f / cycles`, so a unit-amplitude sinusoid at `f` has
//! power 1 at that frequency.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Frequency x time power map.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFreqPower {
    pub freqs_hz: Vec<f64>,
    pub times_s: Vec<f64>,
    /// `power[f][t]`, squared signal units.
    pub power: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub const fn new(lo_hz: f64, hi_hz: f64) -> Self {
        Band { lo_hz, hi_hz }
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo * hi).sqrt()],
        _ => {
            let step = (hi / lo).ln() / (n - 1) as f64;
            (0..n).map(|i| lo * (step * i as f64).exp()).collect()
        }
    }
}

fn validate(rate_hz: f64, band: Band, n_freqs: usize, cycles: f64) -> Result<()> {
    if !(band.lo_hz > 0.0 && band.lo_hz < band.hi_hz && band.hi_hz < rate_hz / 2.0) {
        return Err(Error::param(
            "band",
            format!(
                "need 0 < lo < hi < {} Hz, got {}..{}",
                rate_hz / 2.0,
                band.lo_hz,
                band.hi_hz
            ),
        ));
    }
    if n_freqs == 0 {
        return Err(Error::param("n_freqs", "must be >= 1"));
    }
    if !(cycles >= 3.0) {
        return Err(Error::param("cycles", format!("must be >= 3, got {cycles}")));
    }
    Ok(())
}

/// Per-frequency wavelet power of `x`, one row per entry in `freqs`.
pub fn morlet_power_rows(x: &[f64], rate_hz: f64, freqs: &[f64], cycles: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    if n == 0 || freqs.is_empty() {
        return vec![Vec::new(); freqs.len()];
    }
    let f_min = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let sigma_t = cycles / (2.0 * PI * f_min);
    let pad = (5.0 * sigma_t * rate_hz).ceil() as usize;
    let len = (n + 2 * pad).next_power_of_two();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let mut spectrum: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    fwd.process(&mut spectrum);

    let df = rate_hz / len as f64;
    let scale = 1.0 / len as f64;
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    freqs
        .iter()
        .map(|&f| {
            let sigma_f = f / cycles;
            let denom = 2.0 * sigma_f * sigma_f;
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for k in 1..=len / 2 {
                let nu = k as f64 * df;
                let g = 2.0 * (-(nu - f) * (nu - f) / denom).exp();
                if g > 1e-300 {
                    buf[k] = spectrum[k] * g;
                }
            }
            inv.process(&mut buf);
            buf[..n].iter().map(|c| c.norm_sqr() * scale * scale).collect()
        })
        .collect()
}

pub fn morlet_tf_power(
    x: &[f64],
    rate_hz: f64,
    band: Band,
    n_freqs: usize,
    cycles: f64,
) -> Result<TimeFreqPower> {
    validate(rate_hz, band, n_freqs, cycles)?;
    let freqs = log_spaced(band.lo_hz, band.hi_hz, n_freqs);
    let power = morlet_power_rows(x, rate_hz, &freqs, cycles);
    Ok(TimeFreqPower {
        times_s: (0..x.len()).map(|i| i as f64 / rate_hz).collect(),
        freqs_hz: freqs,
        power,
    })
}

/// Per-sample mean wavelet power across `n_freqs` log-spaced frequencies
/// spanning `band`.
pub fn morlet_band_power(
    x: &[f64],
    rate_hz: f64,
    band: Band,
    n_freqs: usize,
    cycles: f64,
) -> Result<Vec<f64>> {
    validate(rate_hz, band, n_freqs, cycles)?;
    let freqs = log_spaced(band.lo_hz, band.hi_hz, n_freqs);
    Ok(mean_rows(&morlet_power_rows(x, rate_hz, &freqs, cycles)))
}

/// Band power integrated over log-frequency and scaled so that a sinusoid of
/// amplitude `A` well inside the band contributes `A^2`, independent of the
/// band's width. Ratios of these values between bands track ratios of true
/// band energies.
pub fn morlet_band_energy(
    x: &[f64],
    rate_hz: f64,
    band: Band,
    n_freqs: usize,
    cycles: f64,
) -> Result<Vec<f64>> {
    if n_freqs < 2 {
        return Err(Error::param("n_freqs", "band energy needs at least 2 frequencies"));
    }
    let mean = morlet_band_power(x, rate_hz, band, n_freqs, cycles)?;
    let k = energy_scale(band, n_freqs, cycles);
    Ok(mean.into_iter().map(|p| p * k).collect())
}

/// Factor converting a mean band power into a log-frequency band integral.
pub fn energy_scale(band: Band, n_freqs: usize, cycles: f64) -> f64 {
    let step = (band.hi_hz / band.lo_hz).ln() / (n_freqs - 1) as f64;
    n_freqs as f64 * step * cycles / PI.sqrt()
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut acc = vec![0.0; first.len()];
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let k = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f: f64, amp: f64, rate: f64, secs: f64) -> Vec<f64> {
        (0..(rate * secs) as usize)
            .map(|i| amp * (2.0 * PI * f * i as f64 / rate).sin())
            .collect()
    }

    fn interior_mean(v: &[f64]) -> f64 {
        let q = v.len() / 4;
        v[q..v.len() - q].iter().sum::<f64>() / (v.len() - 2 * q) as f64
    }

    #[test]
    fn unit_sine_has_unit_power_at_its_frequency() {
        let x = sine(5.0, 1.0, 500.0, 20.0);
        let rows = morlet_power_rows(&x, 500.0, &[5.0], 6.0);
        let p = interior_mean(&rows[0]);
        assert!((p - 1.0).abs() < 1e-3, "{p}");
    }

    #[test]
    fn in_band_sine_dominates() {
        let x = sine(5.0, 1.0, 500.0, 20.0);
        let theta = morlet_band_power(&x, 500.0, Band::new(3.0, 8.0), 20, 6.0).unwrap();
        let low = morlet_band_power(&x, 500.0, Band::new(0.5, 3.0), 20, 6.0).unwrap();
        assert!(interior_mean(&theta) >= 20.0 * interior_mean(&low));
        let x = sine(1.0, 1.0, 500.0, 20.0);
        let theta = morlet_band_power(&x, 500.0, Band::new(4.0, 7.0), 20, 6.0).unwrap();
        let low = morlet_band_power(&x, 500.0, Band::new(0.5, 3.0), 20, 6.0).unwrap();
        assert!(interior_mean(&theta) < 0.05 * interior_mean(&low));
    }

    #[test]
    fn zero_signal_zero_power() {
        let p = morlet_band_power(&vec![0.0; 2000], 500.0, Band::new(4.0, 7.0), 20, 6.0).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn band_outside_nyquist_rejected() {
        assert!(morlet_band_power(&[0.0; 100], 500.0, Band::new(200.0, 260.0), 20, 6.0).is_err());
        assert!(morlet_band_power(&[0.0; 100], 500.0, Band::new(7.0, 4.0), 20, 6.0).is_err());
        assert!(morlet_band_power(&[0.0; 100], 500.0, Band::new(4.0, 7.0), 20, 2.0).is_err());
    }

    #[test]
    fn energy_is_band_width_independent() {
        // A^2 regardless of which band the sinusoid sits in.
        let x = sine(5.0, 0.7, 500.0, 30.0);
        let e = morlet_band_energy(&x, 500.0, Band::new(3.0, 8.0), 20, 6.0).unwrap();
        assert!((interior_mean(&e) / 0.49 - 1.0).abs() < 0.03);
        let x = sine(1.5, 0.7, 500.0, 30.0);
        let e = morlet_band_energy(&x, 500.0, Band::new(0.5, 3.0), 20, 6.0).unwrap();
        assert!((interior_mean(&e) / 0.49 - 1.0).abs() < 0.03);
    }

    #[test]
    fn tf_power_dimensions() {
        let x = sine(6.0, 1.0, 100.0, 5.0);
        let tf = morlet_tf_power(&x, 100.0, Band::new(2.0, 20.0), 8, 6.0).unwrap();
        assert_eq!(tf.freqs_hz.len(), 8);
        assert_eq!(tf.times_s.len(), 500);
        assert!(tf.power.iter().all(|r| r.len() == 500 && r.iter().all(|&p| p >= 0.0)));
    }

    proptest::proptest! {
        #[test]
        fn power_scales_quadratically(alpha in 0.01f64..100.0, f in 3.5f64..7.5) {
            let x = sine(f, 1.0, 250.0, 4.0);
            let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let p = morlet_band_power(&x, 250.0, Band::new(4.0, 7.0), 10, 6.0).unwrap();
            let pa = morlet_band_power(&ax, 250.0, Band::new(4.0, 7.0), 10, 6.0).unwrap();
            for (a, b) in p.iter().zip(&pa) {
                proptest::prop_assert!((b - alpha * alpha * a).abs() <= 1e-9 * (alpha * alpha * a).abs().max(1e-300));
            }
        }
    }
}
