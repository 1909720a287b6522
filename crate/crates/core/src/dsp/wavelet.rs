//! Baseline drift removal from a Daubechies-4 approximation.

use crate::error::{Error, Result};

/// Daubechies-4 scaling filter (8 taps, 4 vanishing moments).
pub const DB4: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

/// Reconstruction of `x` from its level-`level` approximation coefficients
/// alone (all detail coefficients zeroed).
///
/// The signal is symmetrically extended far enough on both sides that the
/// periodic transform's wrap-around never reaches the original samples.
pub fn wavelet_baseline(x: &[f64], level: u32) -> Result<Vec<f64>> {
    if level == 0 || level > 24 {
        return Err(Error::param("level", format!("must be in 1..=24, got {level}")));
    }
    let block = 1usize << level;
    let n = x.len();
    if n < block {
        return Err(Error::param(
            "signal",
            format!("length {n} shorter than 2^{level} = {block}"),
        ));
    }
    let pad = DB4.len() * block;
    let total = (n + 2 * pad).div_ceil(block) * block;
    let period = 2 * n as i64;
    let ext: Vec<f64> = (0..total)
        .map(|i| {
            let j = (i as i64 - pad as i64).rem_euclid(period) as usize;
            if j < n {
                x[j]
            } else {
                x[2 * n - 1 - j]
            }
        })
        .collect();

    let mut approx = ext;
    for _ in 0..level {
        approx = analysis_step(&approx);
    }
    for _ in 0..level {
        approx = synthesis_step(&approx);
    }
    Ok(approx[pad..pad + n].to_vec())
}

/// `x - wavelet_baseline(x, level)`.
pub fn wavelet_baseline_remove(x: &[f64], level: u32) -> Result<Vec<f64>> {
    let base = wavelet_baseline(x, level)?;
    Ok(x.iter().zip(&base).map(|(v, b)| v - b).collect())
}

fn analysis_step(a: &[f64]) -> Vec<f64> {
    let len = a.len();
    (0..len / 2)
        .map(|i| {
            DB4.iter()
                .enumerate()
                .map(|(j, h)| h * a[(2 * i + j) % len])
                .sum()
        })
        .collect()
}

fn synthesis_step(a: &[f64]) -> Vec<f64> {
    let len = 2 * a.len();
    let mut out = vec![0.0; len];
    for (i, &c) in a.iter().enumerate() {
        for (j, h) in DB4.iter().enumerate() {
            out[(2 * i + j) % len] += h * c;
        }
    }
    out
}
