//! Pipe area and "wave speed".
//!
//! The propagation speed used by the localizer is the bulk flow velocity
//! `c = Q / A` (volumetric flow over pipe cross-section), not an acoustic
//! speed. Pressure is carried along as a label only.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inner diameter of the ABS test pipe, in metres.
pub const ABS_PIPE_INNER_DIAMETER_M: f64 = 0.0334;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HydraulicsError {
    #[error("pipe diameter must be positive and finite, got {0}")]
    InvalidDiameter(f64),
    #[error("{0} must be finite and non-negative, got {1}")]
    InvalidMeasurement(&'static str, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeSpec {
    inner_diameter_m: f64,
}

impl PipeSpec {
    pub fn new(inner_diameter_m: f64) -> Result<Self, HydraulicsError> {
        if !(inner_diameter_m.is_finite() && inner_diameter_m > 0.0) {
            return Err(HydraulicsError::InvalidDiameter(inner_diameter_m));
        }
        Ok(Self { inner_diameter_m })
    }

    pub fn inner_diameter_m(&self) -> f64 {
        self.inner_diameter_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowMeasurement {
    flow_lpm: f64,
    pressure_kgfcm2: f64,
}

impl FlowMeasurement {
    pub fn new(flow_lpm: f64, pressure_kgfcm2: f64) -> Result<Self, HydraulicsError> {
        if !(flow_lpm.is_finite() && flow_lpm >= 0.0) {
            return Err(HydraulicsError::InvalidMeasurement("flow", flow_lpm));
        }
        if !(pressure_kgfcm2.is_finite() && pressure_kgfcm2 >= 0.0) {
            return Err(HydraulicsError::InvalidMeasurement("pressure", pressure_kgfcm2));
        }
        Ok(Self {
            flow_lpm,
            pressure_kgfcm2,
        })
    }

    pub fn flow_lpm(&self) -> f64 {
        self.flow_lpm
    }

    pub fn pressure_kgfcm2(&self) -> f64 {
        self.pressure_kgfcm2
    }
}

/// Cross-section area `pi * (D/2)^2` in m^2.
pub fn pipe_area(spec: &PipeSpec) -> f64 {
    let r = spec.inner_diameter_m / 2.0;
    PI * r * r
}

/// Litres per minute to m^3/s.
pub fn flow_to_m3s(flow_lpm: f64) -> f64 {
    flow_lpm / 60.0 / 1000.0
}

pub fn wave_speed(flow: &FlowMeasurement, spec: &PipeSpec) -> f64 {
    flow_to_m3s(flow.flow_lpm) / pipe_area(spec)
}
