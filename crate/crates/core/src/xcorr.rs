//! Cross-correlation delay estimation between the two sensors.
//!
//! For lag index `k` in `-(N-1)..=N-1`:
//!
//! ```text
//! r[k] = sum_n s1[n] * s2[n + k]
//! ```
//!
//! so a positive peak lag means `s2` is a delayed copy of `s1`: the common
//! feature reaches sensor 2 later. Both inputs are mean-removed first.
//! Normalized values are divided by `sqrt(sum s1^2 * sum s2^2)`.
//!
//! The FFT path zero-pads to the next power of two at or above `2N - 1`, so
//! circular wrap-around never reaches a reported lag. The direct path is the
//! O(N^2) definition above and serves as the reference.

use std::cmp::Ordering;
use std::io::{self, Write};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::Axis;
use crate::spectral;

pub const DEFAULT_THRESHOLD_S: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XcorrError {
    #[error("signal lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("zero-variance input cannot be normalized")]
    DegenerateInput,
    #[error("invalid sample rate {0}")]
    InvalidSampleRate(f64),
    #[error("correlation function is empty")]
    Empty,
    #[error("classification threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("malformed correlation CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMethod {
    #[default]
    Fft,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationOptions {
    pub normalized: bool,
    pub method: CorrelationMethod,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self {
            normalized: true,
            method: CorrelationMethod::Fft,
        }
    }
}

/// Correlation values over a symmetric lag axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFunction {
    pub lags_s: Vec<f64>,
    pub values: Vec<f64>,
    pub normalized: bool,
    pub axis: Axis,
    pub sample_rate_hz: f64,
}

impl CorrelationFunction {
    /// Lag index (in samples) of entry 0.
    pub fn first_lag_index(&self) -> i64 {
        -((self.values.len() as i64 - 1) / 2)
    }

    pub fn lag_index(&self, i: usize) -> i64 {
        self.first_lag_index() + i as i64
    }

    /// Value at an integer lag in samples.
    pub fn at_lag(&self, k: i64) -> Option<f64> {
        let i = k - self.first_lag_index();
        usize::try_from(i).ok().and_then(|i| self.values.get(i).copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NoLeak,
    Leak,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::NoLeak => "NoLeak",
            Classification::Leak => "Leak",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub peak_lag_s: f64,
    pub peak_lag_samples: i64,
    pub peak_value: f64,
    pub axis: Axis,
    pub classification: Option<Classification>,
}

pub fn cross_correlate(
    s1: &[f64],
    s2: &[f64],
    sample_rate_hz: f64,
    axis: Axis,
    opts: CorrelationOptions,
) -> Result<CorrelationFunction, XcorrError> {
    if s1.len() != s2.len() {
        return Err(XcorrError::LengthMismatch(s1.len(), s2.len()));
    }
    let n = s1.len();
    if n < 2 {
        return Err(XcorrError::TooShort(n));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(XcorrError::InvalidSampleRate(sample_rate_hz));
    }

    let a = spectral::remove_mean(s1);
    let b = spectral::remove_mean(s2);
    let mut values = match opts.method {
        CorrelationMethod::Direct => direct(&a, &b),
        CorrelationMethod::Fft => via_fft(&a, &b),
    };

    if opts.normalized {
        let ea: f64 = a.iter().map(|v| v * v).sum();
        let eb: f64 = b.iter().map(|v| v * v).sum();
        let denom = (ea * eb).sqrt();
        if denom == 0.0 || !denom.is_finite() {
            return Err(XcorrError::DegenerateInput);
        }
        for v in &mut values {
            *v /= denom;
        }
    }

    let lags_s = (-(n as i64 - 1)..=(n as i64 - 1))
        .map(|k| k as f64 / sample_rate_hz)
        .collect();
    Ok(CorrelationFunction {
        lags_s,
        values,
        normalized: opts.normalized,
        axis,
        sample_rate_hz,
    })
}

/// Reference O(N^2) evaluation of the correlation sum.
fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() as i64;
    (-(n - 1)..=(n - 1))
        .map(|k| {
            let lo = 0.max(-k);
            let hi = n.min(n - k);
            (lo..hi)
                .map(|i| a[i as usize] * b[(i + k) as usize])
                .sum()
        })
        .collect()
}

fn via_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    // Canonical operand order makes corr(a, b) the exact mirror of corr(b, a).
    let swapped = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        == Some(Ordering::Greater);
    if swapped {
        let mut r = fft_core(b, a);
        r.reverse();
        r
    } else {
        fft_core(a, b)
    }
}

fn fft_core(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let m = (2 * n - 1).next_power_of_two();
    let pad = |x: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (slot, v) in buf.iter_mut().zip(x) {
            slot.re = *v;
        }
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    spectral::forward(&mut fa);
    spectral::forward(&mut fb);
    let mut cross: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    spectral::inverse(&mut cross);

    let scale = 1.0 / m as f64;
    let n = n as i64;
    (-(n - 1)..=(n - 1))
        .map(|k| cross[k.rem_euclid(m as i64) as usize].re * scale)
        .collect()
}

/// Highest value (not highest magnitude). Ties go to the smallest |lag|,
/// then to the negative lag.
pub fn find_peak(corr: &CorrelationFunction) -> Result<DelayEstimate, XcorrError> {
    if corr.values.is_empty() {
        return Err(XcorrError::Empty);
    }
    let mut best = 0usize;
    for i in 1..corr.values.len() {
        let (v, bv) = (corr.values[i], corr.values[best]);
        let (k, bk) = (corr.lag_index(i), corr.lag_index(best));
        let better = match v.total_cmp(&bv) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => k.abs() < bk.abs() || (k.abs() == bk.abs() && k < bk),
        };
        if better {
            best = i;
        }
    }
    Ok(DelayEstimate {
        peak_lag_s: corr.lags_s[best],
        peak_lag_samples: corr.lag_index(best),
        peak_value: corr.values[best],
        axis: corr.axis,
        classification: None,
    })
}

/// Sub-sample peak lag from a parabola through the peak and its neighbours.
/// Falls back to the integer lag at the edges of the lag axis.
pub fn refine_peak_parabolic(corr: &CorrelationFunction, est: &DelayEstimate) -> f64 {
    let i = (est.peak_lag_samples - corr.first_lag_index()) as usize;
    if i == 0 || i + 1 >= corr.values.len() {
        return est.peak_lag_s;
    }
    let (a, b, c) = (corr.values[i - 1], corr.values[i], corr.values[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return est.peak_lag_s;
    }
    let offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    (est.peak_lag_samples as f64 + offset) / corr.sample_rate_hz
}

/// `|lag| <= threshold` is NoLeak (boundary inclusive), anything further
/// from the origin is Leak.
pub fn classify(est: DelayEstimate, threshold_s: f64) -> Result<DelayEstimate, XcorrError> {
    if !(threshold_s.is_finite() && threshold_s > 0.0) {
        return Err(XcorrError::InvalidThreshold(threshold_s));
    }
    let classification = if est.peak_lag_s.abs() <= threshold_s {
        Classification::NoLeak
    } else {
        Classification::Leak
    };
    Ok(DelayEstimate {
        classification: Some(classification),
        ..est
    })
}

/// Writes `lag_s,value` rows with 17 significant digits.
pub fn write_correlation_csv<W: Write>(corr: &CorrelationFunction, mut out: W) -> io::Result<()> {
    writeln!(out, "lag_s,value")?;
    for (lag, v) in corr.lags_s.iter().zip(&corr.values) {
        writeln!(out, "{lag:.16e},{v:.16e}")?;
    }
    out.flush()
}

pub fn correlation_csv_string(corr: &CorrelationFunction) -> String {
    let mut buf = Vec::new();
    write_correlation_csv(corr, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

/// Reads back `(lags, values)` from an exported correlation CSV.
pub fn read_correlation_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), XcorrError> {
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "lag_s,value")) => {}
        _ => {
            return Err(XcorrError::MalformedCsv {
                line: 1,
                reason: "expected header lag_s,value".into(),
            })
        }
    }
    let mut lags = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let bad = |reason: &str| XcorrError::MalformedCsv {
            line: i + 1,
            reason: reason.into(),
        };
        let (l, v) = line.split_once(',').ok_or_else(|| bad("expected two fields"))?;
        lags.push(l.trim().parse().map_err(|_| bad("bad lag"))?);
        values.push(v.trim().parse().map_err(|_| bad("bad value"))?);
    }
    Ok((lags, values))
}
