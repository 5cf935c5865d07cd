//! Leak position from a time delay, error scoring, and the no-leak/buffer
//! calibration of the delay.
//!
//! With sensor spacing `L`, speed `c` and delay `dt` (positive when the
//! feature reaches sensor 2 / left later):
//!
//! ```text
//! d_l = (L - c * dt) / 2
//! ```
//!
//! `d_l` is the distance from sensor 1 (right), the sensor that hears a
//! positive-delay source first. `dt = 0` puts the leak at the midpoint and
//! `c * dt = L` puts it on sensor 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::Axis;

/// Accuracy target used for the ideal-delay tables.
pub const DEFAULT_EPSILON: f64 = 0.029;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizeError {
    #[error("invalid geometry: spacing {spacing_m} m, speed {speed_mps} m/s")]
    InvalidGeometry { spacing_m: f64, speed_mps: f64 },
    #[error("non-finite delay {0}")]
    NonFiniteDelay(f64),
    #[error("actual distance is zero")]
    ZeroActual,
    #[error("epsilon must lie in [0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub axis: Option<Axis>,
    pub d_l_m: f64,
    #[serde(rename = "spacing_L_m")]
    pub spacing_l_m: f64,
    pub wave_speed_mps: f64,
    pub delta_t_s: f64,
    pub error_percent: Option<f64>,
    /// Set when `d_l` falls outside `[0, L]`; the value is never clamped.
    pub out_of_range: bool,
}

impl LocalizationResult {
    pub fn with_axis(mut self, axis: Axis) -> Self {
        self.axis = Some(axis);
        self
    }

    /// Scores the result against a known distance from sensor 1.
    pub fn scored(mut self, d_actual_m: f64) -> Result<Self, LocalizeError> {
        self.error_percent = Some(error_percent(d_actual_m, self.d_l_m)?);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationProfile {
    #[serde(rename = "t_noLeak_s")]
    pub t_no_leak_s: f64,
    pub t_buffer_s: f64,
}

impl CalibrationProfile {
    pub fn new(t_no_leak_s: f64, t_buffer_s: f64) -> Result<Self, LocalizeError> {
        if !(t_no_leak_s.is_finite() && t_buffer_s.is_finite()) {
            return Err(LocalizeError::InvalidInput("calibration times must be finite".into()));
        }
        Ok(Self {
            t_no_leak_s,
            t_buffer_s,
        })
    }
}

/// Delay window that keeps the computed position within `epsilon` of the
/// actual per-side distance, for an equidistant deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealDelayBounds {
    pub d_actual_per_side_m: f64,
    pub epsilon: f64,
    pub wave_speed_mps: f64,
    pub d_min_m: f64,
    pub d_max_m: f64,
    pub dt_min_s: f64,
    pub dt_max_s: f64,
    pub t_actual_min_s: Option<f64>,
    pub t_actual_max_s: Option<f64>,
}

fn check_geometry(spacing_m: f64, speed_mps: f64) -> Result<(), LocalizeError> {
    if spacing_m.is_finite() && spacing_m > 0.0 && speed_mps.is_finite() && speed_mps > 0.0 {
        Ok(())
    } else {
        Err(LocalizeError::InvalidGeometry {
            spacing_m,
            speed_mps,
        })
    }
}

pub fn localize(spacing_l_m: f64, c_mps: f64, delta_t_s: f64) -> Result<LocalizationResult, LocalizeError> {
    check_geometry(spacing_l_m, c_mps)?;
    if !delta_t_s.is_finite() {
        return Err(LocalizeError::NonFiniteDelay(delta_t_s));
    }
    let d_l_m = (spacing_l_m - c_mps * delta_t_s) / 2.0;
    Ok(LocalizationResult {
        axis: None,
        d_l_m,
        spacing_l_m,
        wave_speed_mps: c_mps,
        delta_t_s,
        error_percent: None,
        out_of_range: !(0.0..=spacing_l_m).contains(&d_l_m),
    })
}

/// Delay that places the leak `d_m` from sensor 1: `(L - 2d) / c`.
pub fn delay_for(spacing_l_m: f64, c_mps: f64, d_m: f64) -> Result<f64, LocalizeError> {
    check_geometry(spacing_l_m, c_mps)?;
    Ok((spacing_l_m - 2.0 * d_m) / c_mps)
}

/// `100 * (actual - computed) / actual`; positive when the computed position
/// falls short of the actual one.
pub fn error_percent(d_actual_m: f64, d_computed_m: f64) -> Result<f64, LocalizeError> {
    if d_actual_m == 0.0 {
        return Err(LocalizeError::ZeroActual);
    }
    Ok(100.0 * (d_actual_m - d_computed_m) / d_actual_m)
}

/// `t_measured - t_noLeak - t_buffer`.
pub fn corrected_delay(t_measured_s: f64, cal: &CalibrationProfile) -> f64 {
    t_measured_s - cal.t_no_leak_s - cal.t_buffer_s
}

/// Peak lag that would be observed for an ideal delay on a rig whose
/// no-leak baseline sits at `t_no_leak_s`.
pub fn t_actual(delta_t_ideal_s: f64, t_no_leak_s: f64) -> f64 {
    delta_t_ideal_s + t_no_leak_s
}

pub fn ideal_delay_bounds(
    d_actual_per_side_m: f64,
    c_mps: f64,
    epsilon: f64,
    t_no_leak_s: Option<f64>,
) -> Result<IdealDelayBounds, LocalizeError> {
    if !(epsilon.is_finite() && (0.0..1.0).contains(&epsilon)) {
        return Err(LocalizeError::InvalidEpsilon(epsilon));
    }
    check_geometry(d_actual_per_side_m, c_mps)?;
    if let Some(t) = t_no_leak_s {
        if !t.is_finite() {
            return Err(LocalizeError::InvalidInput("t_noLeak must be finite".into()));
        }
    }

    let d = d_actual_per_side_m;
    let d_min_m = d * (1.0 - epsilon);
    let d_max_m = d * (1.0 + epsilon);
    // With L = 2d: dt(d_min) = (2d - 2d(1 - eps)) / c = 2 d eps / c, and
    // dt(d_max) is its negative.
    let dt_min_s = 2.0 * d * epsilon / c_mps;
    let dt_max_s = -dt_min_s;
    Ok(IdealDelayBounds {
        d_actual_per_side_m: d,
        epsilon,
        wave_speed_mps: c_mps,
        d_min_m,
        d_max_m,
        dt_min_s,
        dt_max_s,
        t_actual_min_s: t_no_leak_s.map(|t| t_actual(dt_min_s, t)),
        t_actual_max_s: t_no_leak_s.map(|t| t_actual(dt_max_s, t)),
    })
}

/// Buffer time that best closes the residual `t_measured - t_noLeak - dt_ideal`
/// over several scenarios with known leak positions: the mean residual.
pub fn fit_buffer(residuals_s: &[f64]) -> Option<f64> {
    if residuals_s.is_empty() {
        return None;
    }
    Some(residuals_s.iter().sum::<f64>() / residuals_s.len() as f64)
}
