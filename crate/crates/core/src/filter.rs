//! Baseline-driven interference removal.
//!
//! Rotating machinery on the rig (motor, pump, valve) leaves stable spectral
//! lines in every recording. A profile of those lines is estimated from a
//! no-leak capture and each line is then notched out of the recordings that
//! go into the correlation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{Axis, TriAxialSeries};
use crate::spectral;

pub const DEFAULT_WINDOW: usize = 1024;
pub const DEFAULT_TOP_K: usize = 5;
pub const DEFAULT_NOTCH_BANDWIDTH_HZ: f64 = 2.0;
/// A line must stand this many times above the median spectral magnitude.
pub const DEFAULT_MIN_PROMINENCE: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("baseline has {len} samples, estimation window needs {window}")]
    TooShort { len: usize, window: usize },
    #[error("line at {frequency_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    NyquistViolation { frequency_hz: f64, nyquist_hz: f64 },
    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterferenceSource {
    Motor,
    Pump,
    Valve,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub frequency_hz: f64,
    pub magnitude: f64,
}

/// Dominant interference lines, sorted by frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceProfile {
    pub source: InterferenceSource,
    pub pressure_kgfcm2: f64,
    #[serde(rename = "bins")]
    pub lines: Vec<SpectralLine>,
    pub estimation_window: usize,
}

impl InterferenceProfile {
    pub fn empty(source: InterferenceSource) -> Self {
        Self {
            source,
            pressure_kgfcm2: 0.0,
            lines: Vec::new(),
            estimation_window: DEFAULT_WINDOW,
        }
    }

    /// Profile with explicit line frequencies (unit magnitude).
    pub fn from_frequencies(source: InterferenceSource, freqs: &[f64]) -> Self {
        let mut lines: Vec<SpectralLine> = freqs
            .iter()
            .map(|&f| SpectralLine {
                frequency_hz: f,
                magnitude: 1.0,
            })
            .collect();
        lines.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
        Self {
            lines,
            ..Self::empty(source)
        }
    }

    pub fn with_pressure(mut self, pressure_kgfcm2: f64) -> Self {
        self.pressure_kgfcm2 = pressure_kgfcm2;
        self
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.frequency_hz).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub top_k: usize,
    pub window: usize,
    pub min_prominence: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            top_k: DEFAULT_TOP_K,
            window: DEFAULT_WINDOW,
            min_prominence: DEFAULT_MIN_PROMINENCE,
        }
    }
}

pub fn estimate_profile(
    baseline: &TriAxialSeries,
    source: InterferenceSource,
    top_k: usize,
) -> Result<InterferenceProfile, FilterError> {
    estimate_profile_with(
        baseline,
        source,
        &ProfileOptions {
            top_k,
            ..ProfileOptions::default()
        },
    )
}

/// Picks the strongest spectral peaks of the mean-removed baseline, per axis,
/// then merges the three axes and keeps the `top_k` strongest overall.
pub fn estimate_profile_with(
    baseline: &TriAxialSeries,
    source: InterferenceSource,
    opts: &ProfileOptions,
) -> Result<InterferenceProfile, FilterError> {
    if opts.top_k == 0 {
        return Err(FilterError::InvalidParameter("top_k must be positive".into()));
    }
    if opts.window < 8 {
        return Err(FilterError::InvalidParameter(format!(
            "estimation window {} is too small",
            opts.window
        )));
    }
    if baseline.len() < opts.window {
        return Err(FilterError::TooShort {
            len: baseline.len(),
            window: opts.window,
        });
    }

    let fs = baseline.sample_rate_hz();
    let bin_hz = fs / opts.window as f64;
    let mut candidates = Vec::new();
    for axis in Axis::ALL {
        let raw = baseline.axis(axis);
        candidates.extend(axis_peaks(&raw, fs, opts));
    }

    candidates.sort_by(|a: &SpectralLine, b| {
        b.magnitude
            .total_cmp(&a.magnitude)
            .then(a.frequency_hz.total_cmp(&b.frequency_hz))
    });
    let mut lines: Vec<SpectralLine> = Vec::new();
    for c in candidates {
        if lines.len() == opts.top_k {
            break;
        }
        if lines
            .iter()
            .all(|l| (l.frequency_hz - c.frequency_hz).abs() > bin_hz)
        {
            lines.push(c);
        }
    }
    lines.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));

    Ok(InterferenceProfile {
        source,
        pressure_kgfcm2: 0.0,
        lines,
        estimation_window: opts.window,
    })
}

fn axis_peaks(raw: &[f64], fs: f64, opts: &ProfileOptions) -> Vec<SpectralLine> {
    let max_abs = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-9 * max_abs;
    let x = spectral::remove_mean(raw);
    let spec = spectral::amplitude_spectrum(&x, opts.window);
    let last = spec.len() - 1;

    let mut interior: Vec<f64> = spec[1..last].to_vec();
    interior.sort_by(f64::total_cmp);
    let median = interior[interior.len() / 2];
    let threshold = floor.max(opts.min_prominence * median);

    let mut peaks = Vec::new();
    for k in 1..last {
        let m = spec[k];
        if m > spec[k - 1] && m >= spec[k + 1] && m > threshold {
            let offset = parabolic_offset(spec[k - 1], m, spec[k + 1]);
            let f = ((k as f64 + offset) * fs / opts.window as f64).clamp(0.0, fs / 2.0);
            peaks.push(SpectralLine {
                frequency_hz: f,
                magnitude: m,
            });
        }
    }
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    peaks.truncate(opts.top_k);
    peaks
}

/// Vertex offset (in bins) of a parabola through the log power of three
/// neighbouring bins.
fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    if left <= 0.0 || centre <= 0.0 || right <= 0.0 {
        return 0.0;
    }
    let (a, b, c) = (left.ln(), centre.ln(), right.ln());
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// Second-order notch with an exact -3 dB bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Notch {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Notch {
    pub fn new(sample_rate_hz: f64, centre_hz: f64, bandwidth_hz: f64) -> Result<Self, FilterError> {
        let nyquist = sample_rate_hz / 2.0;
        if !(centre_hz >= 0.0 && centre_hz < nyquist) {
            return Err(FilterError::NyquistViolation {
                frequency_hz: centre_hz,
                nyquist_hz: nyquist,
            });
        }
        if !(bandwidth_hz > 0.0 && bandwidth_hz < nyquist) {
            return Err(FilterError::InvalidParameter(format!(
                "notch bandwidth {bandwidth_hz} Hz must lie in (0, {nyquist}) Hz"
            )));
        }
        let w0 = 2.0 * PI * centre_hz / sample_rate_hz;
        let beta = (PI * bandwidth_hz / sample_rate_hz).tan();
        let g = 1.0 / (1.0 + beta);
        let cos_w0 = w0.cos();
        Ok(Self {
            b0: g,
            b1: -2.0 * g * cos_w0,
            b2: g,
            a1: -2.0 * g * cos_w0,
            a2: 2.0 * g - 1.0,
        })
    }

    /// Runs the section over `x` from zero initial state.
    pub fn apply(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b0 * input + s1;
            s1 = self.b1 * input - self.a1 * y + s2;
            s2 = self.b2 * input - self.a2 * y;
            *v = y;
        }
    }

    /// Magnitude response at `freq_hz`.
    pub fn gain_at(&self, sample_rate_hz: f64, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (self.b0 + self.b1 * c1 + self.b2 * c2, self.b1 * s1 + self.b2 * s2);
        let den = (1.0 + self.a1 * c1 + self.a2 * c2, self.a1 * s1 + self.a2 * s2);
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }
}

pub fn filter_series(
    series: &TriAxialSeries,
    profile: &InterferenceProfile,
) -> Result<TriAxialSeries, FilterError> {
    filter_series_with(series, profile, DEFAULT_NOTCH_BANDWIDTH_HZ)
}

/// Mean-removes each axis, then cascades one notch per profile line.
pub fn filter_series_with(
    series: &TriAxialSeries,
    profile: &InterferenceProfile,
    bandwidth_hz: f64,
) -> Result<TriAxialSeries, FilterError> {
    let fs = series.sample_rate_hz();
    let notches = profile
        .lines
        .iter()
        .map(|l| Notch::new(fs, l.frequency_hz, bandwidth_hz))
        .collect::<Result<Vec<_>, _>>()?;

    let axes = series.axes().map(|raw| {
        let mut x = spectral::remove_mean(&raw);
        for n in &notches {
            n.apply(&mut x);
        }
        x
    });
    TriAxialSeries::from_axes(fs, series.start_time_s(), axes)
        .map_err(|e| FilterError::InvalidParameter(e.to_string()))
}
