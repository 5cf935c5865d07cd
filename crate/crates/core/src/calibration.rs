//! Calibration tables keyed by (pressure, spacing, axis).
//!
//! `t_noLeak` is the correlation peak lag of a no-leak recording for the
//! condition. When recordings with a known leak position are available, the
//! buffer time is fitted as the mean of `t_measured - t_noLeak - dt_ideal`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydraulics::{self, FlowMeasurement, HydraulicsError, PipeSpec};
use crate::localizer::{self, CalibrationProfile, LocalizeError};
use crate::pipeline::{self, PipelineError, PipelineOptions};
use crate::signal::{Axis, RecordingPair};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("no no-leak baseline for pressure {pressure_kgfcm2} kgf/cm2, spacing {spacing_l_m} m")]
    MissingBaseline { pressure_kgfcm2: f64, spacing_l_m: f64 },
    #[error("no no-leak recordings supplied")]
    NoBaselines,
    #[error("leak recording at pressure {pressure_kgfcm2}, spacing {spacing_l_m} m has no known leak position")]
    MissingTruth { pressure_kgfcm2: f64, spacing_l_m: f64 },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Hydraulics(#[from] HydraulicsError),
    #[error(transparent)]
    Localize(#[from] LocalizeError),
}

/// Condition key with pressure and spacing quantized to micro-units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConditionKey {
    pressure_micro: i64,
    spacing_micro: i64,
}

impl ConditionKey {
    pub fn new(pressure_kgfcm2: f64, spacing_l_m: f64) -> Self {
        Self {
            pressure_micro: (pressure_kgfcm2 * 1e6).round() as i64,
            spacing_micro: (spacing_l_m * 1e6).round() as i64,
        }
    }

    pub fn of(pair: &RecordingPair) -> Self {
        Self::new(pair.pressure_kgfcm2(), pair.geometry.spacing_l_m())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub pressure_kgfcm2: f64,
    #[serde(rename = "spacing_L_m")]
    pub spacing_l_m: f64,
    pub axis: Axis,
    #[serde(rename = "t_noLeak_s")]
    pub t_no_leak_s: f64,
    pub t_buffer_s: f64,
    pub baseline_pairs: usize,
    pub buffer_fit_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub entries: Vec<CalibrationEntry>,
}

impl CalibrationTable {
    pub fn lookup(&self, pressure_kgfcm2: f64, spacing_l_m: f64, axis: Axis) -> Option<CalibrationProfile> {
        let key = ConditionKey::new(pressure_kgfcm2, spacing_l_m);
        self.entries
            .iter()
            .find(|e| e.axis == axis && ConditionKey::new(e.pressure_kgfcm2, e.spacing_l_m) == key)
            .map(|e| CalibrationProfile {
                t_no_leak_s: e.t_no_leak_s,
                t_buffer_s: e.t_buffer_s,
            })
    }

    /// Per-axis profiles for a condition, if all three axes are present.
    pub fn profiles_for(&self, pressure_kgfcm2: f64, spacing_l_m: f64) -> Option<[CalibrationProfile; 3]> {
        let x = self.lookup(pressure_kgfcm2, spacing_l_m, Axis::X)?;
        let y = self.lookup(pressure_kgfcm2, spacing_l_m, Axis::Y)?;
        let z = self.lookup(pressure_kgfcm2, spacing_l_m, Axis::Z)?;
        Some([x, y, z])
    }
}

#[derive(Default)]
struct Accumulator {
    pressure: f64,
    spacing: f64,
    lags: [Vec<f64>; 3],
    residuals: [Vec<f64>; 3],
}

/// Builds a calibration table from no-leak baselines and, optionally,
/// recordings with a known leak position for the buffer fit.
pub fn calibrate(
    baselines: &[RecordingPair],
    known_leaks: &[RecordingPair],
    spec: &PipeSpec,
    opts: &PipelineOptions,
) -> Result<CalibrationTable, CalibrationError> {
    if baselines.is_empty() {
        return Err(CalibrationError::NoBaselines);
    }
    let mut acc: BTreeMap<ConditionKey, Accumulator> = BTreeMap::new();
    for pair in baselines {
        let detected = pipeline::detect_pair(pair, opts)?;
        let slot = acc.entry(ConditionKey::of(pair)).or_insert_with(|| Accumulator {
            pressure: pair.pressure_kgfcm2(),
            spacing: pair.geometry.spacing_l_m(),
            ..Accumulator::default()
        });
        for (axis_lags, (_, _, measured)) in slot.lags.iter_mut().zip(&detected) {
            axis_lags.push(*measured);
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for pair in known_leaks {
        let key = ConditionKey::of(pair);
        let spacing = pair.geometry.spacing_l_m();
        let slot = acc.get_mut(&key).ok_or(CalibrationError::MissingBaseline {
            pressure_kgfcm2: pair.pressure_kgfcm2(),
            spacing_l_m: spacing,
        })?;
        let d_actual = pair
            .geometry
            .reference_leak_distance_m()
            .ok_or(CalibrationError::MissingTruth {
                pressure_kgfcm2: pair.pressure_kgfcm2(),
                spacing_l_m: spacing,
            })?;
        let flow = FlowMeasurement::new(pair.flow_lpm(), pair.pressure_kgfcm2())?;
        let c = hydraulics::wave_speed(&flow, spec);
        let dt_ideal = localizer::delay_for(spacing, c, d_actual)?;
        let detected = pipeline::detect_pair(pair, opts)?;
        for (i, (_, _, measured)) in detected.iter().enumerate() {
            let t_no_leak = mean(&slot.lags[i]);
            slot.residuals[i].push(measured - t_no_leak - dt_ideal);
        }
    }

    let mut entries = Vec::new();
    for slot in acc.values() {
        for axis in Axis::ALL {
            let i = axis.index();
            entries.push(CalibrationEntry {
                pressure_kgfcm2: slot.pressure,
                spacing_l_m: slot.spacing,
                axis,
                t_no_leak_s: mean(&slot.lags[i]),
                t_buffer_s: localizer::fit_buffer(&slot.residuals[i]).unwrap_or(0.0),
                baseline_pairs: slot.lags[i].len(),
                buffer_fit_pairs: slot.residuals[i].len(),
            });
        }
    }
    Ok(CalibrationTable { entries })
}
