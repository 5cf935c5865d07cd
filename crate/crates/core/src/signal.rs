//! Recordings, deployment geometry, CSV ingestion and pair alignment.
//!
//! A recording is a uniformly sampled three-axis acceleration series (in g)
//! plus the labels of the condition it was captured under. Two recordings,
//! one on each side of the suspected leak, form a [`RecordingPair`].

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when comparing sample rates and equidistant spacings.
const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("empty file")]
    EmptyFile,
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("non-uniform sampling at line {line}: gap {gap_s} s vs period {period_s} s")]
    NonUniformSampling { line: usize, gap_s: f64, period_s: f64 },
    #[error("at least two rows are needed to infer the sample rate")]
    InsufficientRows,
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("sample rate mismatch: {left_hz} Hz vs {right_hz} Hz")]
    RateMismatch { left_hz: f64, right_hz: f64 },
    #[error("recordings do not overlap in time")]
    NoOverlap,
    #[error("pair labels disagree: {0}")]
    LabelMismatch(String),
}

/// Accelerometer axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether the pipe was leaking when the recording was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    NoLeak,
    Leak,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::NoLeak => "no_leak",
            Scenario::Leak => "leak",
        }
    }
}

/// Mounting side relative to the leak. Sensor 1 sits on the right, sensor 2
/// on the left; water flows from right to left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Uniformly sampled three-axis acceleration series.
///
/// Sample `i` is taken at `start_time_s + i / sample_rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriAxialSeries {
    sample_rate_hz: f64,
    start_time_s: f64,
    samples: Vec<[f64; 3]>,
}

impl TriAxialSeries {
    pub fn new(
        sample_rate_hz: f64,
        start_time_s: f64,
        samples: Vec<[f64; 3]>,
    ) -> Result<Self, SignalError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(SignalError::InvalidSeries(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if !start_time_s.is_finite() {
            return Err(SignalError::InvalidSeries("start time is not finite".into()));
        }
        if samples.is_empty() {
            return Err(SignalError::InvalidSeries("series is empty".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.iter().all(|v| v.is_finite())) {
            return Err(SignalError::InvalidSeries(format!("non-finite value at sample {i}")));
        }
        Ok(Self {
            sample_rate_hz,
            start_time_s,
            samples,
        })
    }

    /// Builds a series from three equally long per-axis vectors.
    pub fn from_axes(
        sample_rate_hz: f64,
        start_time_s: f64,
        axes: [Vec<f64>; 3],
    ) -> Result<Self, SignalError> {
        let n = axes[0].len();
        if axes[1].len() != n || axes[2].len() != n {
            return Err(SignalError::InvalidSeries("axis lengths differ".into()));
        }
        let samples = (0..n).map(|i| [axes[0][i], axes[1][i], axes[2][i]]).collect();
        Self::new(sample_rate_hz, start_time_s, samples)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time_s + index as f64 / self.sample_rate_hz
    }

    /// Time one period past the last sample.
    pub fn end_time_s(&self) -> f64 {
        self.time_at(self.samples.len())
    }

    pub fn axis(&self, axis: Axis) -> Vec<f64> {
        let k = axis.index();
        self.samples.iter().map(|s| s[k]).collect()
    }

    pub fn axes(&self) -> [Vec<f64>; 3] {
        Axis::ALL.map(|a| self.axis(a))
    }

    /// Sub-series covering `len` samples from `offset`. The start time moves
    /// so that every kept sample keeps its original timestamp.
    pub fn window(&self, offset: usize, len: usize) -> Result<Self, SignalError> {
        if len == 0 || offset + len > self.samples.len() {
            return Err(SignalError::InvalidSeries(format!(
                "window {offset}+{len} outside series of length {}",
                self.samples.len()
            )));
        }
        let start = if offset == 0 {
            self.start_time_s
        } else {
            self.time_at(offset)
        };
        Ok(Self {
            sample_rate_hz: self.sample_rate_hz,
            start_time_s: start,
            samples: self.samples[offset..offset + len].to_vec(),
        })
    }
}

/// Labels attached to a recording at ingestion time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub sensor_id: String,
    pub pressure_kgfcm2: f64,
    pub flow_lpm: f64,
    pub scenario: Scenario,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecording {
    pub sensor_id: String,
    pub series: TriAxialSeries,
    pub pressure_kgfcm2: f64,
    pub flow_lpm: f64,
    pub scenario: Scenario,
    pub side: Side,
}

impl SensorRecording {
    pub fn new(meta: RecordingMeta, series: TriAxialSeries) -> Result<Self, SignalError> {
        if !(meta.pressure_kgfcm2.is_finite() && meta.pressure_kgfcm2 >= 0.0) {
            return Err(SignalError::InvalidSeries(format!(
                "pressure must be finite and non-negative, got {}",
                meta.pressure_kgfcm2
            )));
        }
        if !(meta.flow_lpm.is_finite() && meta.flow_lpm >= 0.0) {
            return Err(SignalError::InvalidSeries(format!(
                "flow must be finite and non-negative, got {}",
                meta.flow_lpm
            )));
        }
        Ok(Self {
            sensor_id: meta.sensor_id,
            series,
            pressure_kgfcm2: meta.pressure_kgfcm2,
            flow_lpm: meta.flow_lpm,
            scenario: meta.scenario,
            side: meta.side,
        })
    }

    pub fn meta(&self) -> RecordingMeta {
        RecordingMeta {
            sensor_id: self.sensor_id.clone(),
            pressure_kgfcm2: self.pressure_kgfcm2,
            flow_lpm: self.flow_lpm,
            scenario: self.scenario,
            side: self.side,
        }
    }

    fn with_series(&self, series: TriAxialSeries) -> Self {
        Self {
            series,
            ..self.clone()
        }
    }
}

/// Where the two sensors sit relative to each other and to the leak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeploymentGeometry {
    #[serde(rename = "spacing_L_m")]
    spacing_l_m: f64,
    per_side_m: Option<f64>,
    true_leak_from_left_m: Option<f64>,
}

impl DeploymentGeometry {
    pub fn new(
        spacing_l_m: f64,
        per_side_m: Option<f64>,
        true_leak_from_left_m: Option<f64>,
    ) -> Result<Self, SignalError> {
        if !(spacing_l_m.is_finite() && spacing_l_m > 0.0) {
            return Err(SignalError::InvalidGeometry(format!(
                "sensor spacing must be positive, got {spacing_l_m}"
            )));
        }
        if let Some(d) = per_side_m {
            if !(d.is_finite() && d > 0.0) {
                return Err(SignalError::InvalidGeometry(format!(
                    "per-side distance must be positive, got {d}"
                )));
            }
            if (spacing_l_m - 2.0 * d).abs() > GEOMETRY_TOL {
                return Err(SignalError::InvalidGeometry(format!(
                    "spacing {spacing_l_m} m is not twice the per-side distance {d} m"
                )));
            }
        }
        if let Some(t) = true_leak_from_left_m {
            if !(t.is_finite() && (0.0..=spacing_l_m).contains(&t)) {
                return Err(SignalError::InvalidGeometry(format!(
                    "leak position {t} m outside [0, {spacing_l_m}] m"
                )));
            }
        }
        Ok(Self {
            spacing_l_m,
            per_side_m,
            true_leak_from_left_m,
        })
    }

    /// Sensors mounted `per_side_m` either side of the marked leak point.
    pub fn equidistant(per_side_m: f64) -> Result<Self, SignalError> {
        Self::new(2.0 * per_side_m, Some(per_side_m), None)
    }

    pub fn with_true_leak(self, from_left_m: f64) -> Result<Self, SignalError> {
        Self::new(self.spacing_l_m, self.per_side_m, Some(from_left_m))
    }

    pub fn spacing_l_m(&self) -> f64 {
        self.spacing_l_m
    }

    pub fn per_side_m(&self) -> Option<f64> {
        self.per_side_m
    }

    pub fn true_leak_from_left_m(&self) -> Option<f64> {
        self.true_leak_from_left_m
    }

    /// Known leak distance from the right sensor (sensor 1), which is the
    /// reference end of the localization formula. Falls back to the per-side
    /// distance when only the marked midpoint is known.
    pub fn reference_leak_distance_m(&self) -> Option<f64> {
        self.true_leak_from_left_m
            .map(|t| self.spacing_l_m - t)
            .or(self.per_side_m)
    }
}

/// Two time-aligned recordings from either side of the leak.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingPair {
    pub left: SensorRecording,
    pub right: SensorRecording,
    pub geometry: DeploymentGeometry,
    /// `right.start - left.start` after trimming: the sub-sample part of the
    /// capture offset. Kept for calibration, never resampled away.
    pub start_offset_s: f64,
}

impl RecordingPair {
    pub fn sample_rate_hz(&self) -> f64 {
        self.left.series.sample_rate_hz()
    }

    pub fn len(&self) -> usize {
        self.left.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.series.is_empty()
    }

    pub fn scenario(&self) -> Scenario {
        self.left.scenario
    }

    pub fn pressure_kgfcm2(&self) -> f64 {
        self.left.pressure_kgfcm2
    }

    pub fn flow_lpm(&self) -> f64 {
        self.left.flow_lpm
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> SignalError {
    SignalError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

/// Parses a sensor CSV (`t,ax,ay,az` header, seconds and g).
///
/// Gaps are checked against the period implied by the first two timestamps;
/// the reported rate is then estimated from the whole timestamp span and
/// snapped to micro-hertz so that write/parse cycles are stable.
pub fn parse_recording(csv_text: &str, meta: RecordingMeta) -> Result<SensorRecording, SignalError> {
    let mut lines = csv_text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_idx, header) = lines.next().ok_or(SignalError::EmptyFile)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["t", "ax", "ay", "az"] {
        return Err(malformed(header_idx + 1, format!("expected header t,ax,ay,az, got {header:?}")));
    }

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(malformed(idx + 1, format!("expected 4 fields, got {}", fields.len())));
        }
        let mut row = [0.0f64; 4];
        for (slot, field) in row.iter_mut().zip(&fields) {
            *slot = field
                .trim()
                .parse::<f64>()
                .map_err(|_| malformed(idx + 1, format!("not a number: {:?}", field.trim())))?;
            if !slot.is_finite() {
                return Err(malformed(idx + 1, "non-finite value"));
            }
        }
        times.push((idx + 1, row[0]));
        samples.push([row[1], row[2], row[3]]);
    }

    match times.len() {
        0 => return Err(SignalError::EmptyFile),
        1 => return Err(SignalError::InsufficientRows),
        _ => {}
    }

    let period = times[1].1 - times[0].1;
    if period <= 0.0 {
        return Err(SignalError::NonUniformSampling {
            line: times[1].0,
            gap_s: period,
            period_s: period,
        });
    }
    for w in times.windows(2) {
        let gap = w[1].1 - w[0].1;
        if (gap - period).abs() > 0.5 * period {
            return Err(SignalError::NonUniformSampling {
                line: w[1].0,
                gap_s: gap,
                period_s: period,
            });
        }
    }

    let n = times.len();
    let span = times[n - 1].1 - times[0].1;
    let rate = ((n - 1) as f64 / span * 1e6).round() / 1e6;
    let series = TriAxialSeries::new(rate, times[0].1, samples)?;
    SensorRecording::new(meta, series)
}

/// Serializes a series in the sensor CSV format. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_recording_csv(series: &TriAxialSeries) -> String {
    let mut out = String::with_capacity(series.len() * 48 + 16);
    out.push_str("t,ax,ay,az\n");
    for (i, s) in series.samples().iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", series.time_at(i), s[0], s[1], s[2]);
    }
    out
}

/// Trims two recordings to their common time window.
///
/// The integer part of the start-time offset is removed by trimming; the
/// remainder stays on the pair as `start_offset_s`.
pub fn align_pair(
    left: SensorRecording,
    right: SensorRecording,
    geometry: DeploymentGeometry,
) -> Result<RecordingPair, SignalError> {
    if left.side != Side::Left || right.side != Side::Right {
        return Err(SignalError::LabelMismatch(
            "left recording must be Left and right recording Right".into(),
        ));
    }
    if left.scenario != right.scenario {
        return Err(SignalError::LabelMismatch("scenarios differ".into()));
    }
    if left.pressure_kgfcm2 != right.pressure_kgfcm2 || left.flow_lpm != right.flow_lpm {
        return Err(SignalError::LabelMismatch("pressure or flow labels differ".into()));
    }

    let fs = left.series.sample_rate_hz();
    let fs_r = right.series.sample_rate_hz();
    if (fs - fs_r).abs() > GEOMETRY_TOL * fs.max(fs_r) {
        return Err(SignalError::RateMismatch {
            left_hz: fs,
            right_hz: fs_r,
        });
    }

    let shift = ((right.series.start_time_s() - left.series.start_time_s()) * fs).round();
    let (left_off, right_off) = if shift >= 0.0 {
        (shift as usize, 0usize)
    } else {
        (0usize, (-shift) as usize)
    };
    let left_avail = left.series.len().saturating_sub(left_off);
    let right_avail = right.series.len().saturating_sub(right_off);
    let len = left_avail.min(right_avail);
    if len == 0 {
        return Err(SignalError::NoOverlap);
    }

    let left_series = left.series.window(left_off, len)?;
    let right_series = right.series.window(right_off, len)?;
    let start_offset_s = right_series.start_time_s() - left_series.start_time_s();
    Ok(RecordingPair {
        left: left.with_series(left_series),
        right: right.with_series(right_series),
        geometry,
        start_offset_s,
    })
}
