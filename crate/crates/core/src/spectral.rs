//! Small FFT helpers shared by the correlation engine, the interference
//! profiler and the simulator.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn remove_mean(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    x.iter().map(|v| v - m).collect()
}

pub(crate) fn forward(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// Unnormalized inverse transform.
pub(crate) fn inverse(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
}

pub(crate) fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Welch-averaged amplitude spectrum over non-overlapping Hann-windowed
/// segments of `window` samples. Bin `k` sits at `k * fs / window`; a
/// sinusoid of amplitude `A` centred on a bin reads approximately `A`.
pub(crate) fn amplitude_spectrum(x: &[f64], window: usize) -> Vec<f64> {
    let w = hann(window);
    let gain: f64 = w.iter().sum();
    let segments = x.len() / window;
    let half = window / 2 + 1;
    let mut power = vec![0.0; half];
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    for s in 0..segments {
        let seg = &x[s * window..(s + 1) * window];
        for (b, (v, wv)) in buf.iter_mut().zip(seg.iter().zip(&w)) {
            *b = Complex64::new(v * wv, 0.0);
        }
        forward(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
    }
    power
        .iter()
        .map(|p| 2.0 * (p / segments.max(1) as f64).sqrt() / gain)
        .collect()
}

/// Sum of `|X_k|^2` over the bins of the Hann-windowed signal whose
/// frequency falls in `[low_hz, high_hz]`.
pub fn band_power(x: &[f64], sample_rate_hz: f64, low_hz: f64, high_hz: f64) -> f64 {
    let n = x.len();
    let w = hann(n);
    let mut buf: Vec<Complex64> = x
        .iter()
        .zip(&w)
        .map(|(v, wv)| Complex64::new(v * wv, 0.0))
        .collect();
    forward(&mut buf);
    (0..=n / 2)
        .filter(|&k| {
            let f = k as f64 * sample_rate_hz / n as f64;
            f >= low_hz && f <= high_hz
        })
        .map(|k| buf[k].norm_sqr())
        .sum()
}

#[cfg(test)]
pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}
