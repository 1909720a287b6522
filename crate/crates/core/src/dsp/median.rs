/// Odd window length in samples for `window_ms` at `rate_hz`, rounded up.
pub fn median_window_len(rate_hz: f64, window_ms: f64) -> usize {
    let n = (window_ms * rate_hz / 1000.0).ceil().max(1.0) as usize;
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

/// Centered sliding median. Near the edges the window shrinks to the samples
/// that exist; an even-sized window takes the mean of its two middle values.
pub fn median_filter(x: &[f64], rate_hz: f64, window_ms: f64) -> Vec<f64> {
    let half = median_window_len(rate_hz, window_ms) / 2;
    sliding_median(x, half)
}

pub(crate) fn sliding_median(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    // Sorted copy of the current window, maintained incrementally.
    let mut window: Vec<f64> = Vec::with_capacity(2 * half + 1);
    let (mut lo, mut hi) = (0usize, 0usize); // window covers x[lo..hi]
    for i in 0..n {
        let want_lo = i.saturating_sub(half);
        let want_hi = (i + half + 1).min(n);
        while hi < want_hi {
            let v = x[hi];
            let pos = window.partition_point(|&w| w < v);
            window.insert(pos, v);
            hi += 1;
        }
        while lo < want_lo {
            let v = x[lo];
            let pos = window.partition_point(|&w| w < v);
            window.remove(pos);
            lo += 1;
        }
        let m = window.len();
        out.push(if m % 2 == 1 {
            window[m / 2]
        } else {
            0.5 * (window[m / 2 - 1] + window[m / 2])
        });
    }
    out
}
