//! Published experimental inputs and results bundled with the crate.
//!
//! Per-condition rows hold 12 cells ordered by sensor distance
//! (0.5, 1.0, 1.5, 2.0 m) and then axis (x, y, z). Cells that were not
//! printed are `None`.

use std::sync::OnceLock;

use serde::Deserialize;

use crate::signal::{Axis, Scenario};

const TABLES_JSON: &str = include_str!("../data/published_tables.json");

#[derive(Debug, Clone, Deserialize)]
pub struct WaveSpeedRow {
    pub pressure_kgfcm2: f64,
    pub flow_lpm: f64,
    pub wave_speed_mps: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PeakLagRow {
    pub pressure_kgfcm2: f64,
    pub scenario: Scenario,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LeakDistanceRow {
    pub pressure_kgfcm2: f64,
    pub distance_m: Vec<Option<f64>>,
    pub error_percent: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct IdealDistances {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Eight cells per row: (min, max) for each sensor distance.
#[derive(Debug, Clone, Deserialize)]
pub struct IdealDelayRow {
    pub pressure_kgfcm2: f64,
    pub dt_s: Vec<f64>,
    pub t_no_leak_s: Vec<f64>,
    pub t_actual_s: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PublishedTables {
    pub pipe_inner_diameter_m: f64,
    pub pipe_area_m2: f64,
    pub epsilon: f64,
    pub sensor_distances_m: Vec<f64>,
    pub wave_speed: Vec<WaveSpeedRow>,
    pub peak_lags_s: Vec<PeakLagRow>,
    pub leak_distances: Vec<LeakDistanceRow>,
    pub ideal_distance_m: IdealDistances,
    pub ideal_delays: Vec<IdealDelayRow>,
}

pub fn tables() -> &'static PublishedTables {
    static TABLES: OnceLock<PublishedTables> = OnceLock::new();
    TABLES.get_or_init(|| serde_json::from_str(TABLES_JSON).expect("bundled tables are valid JSON"))
}

/// Index of (distance, axis) within a 12-cell row.
pub fn cell_index(distance_idx: usize, axis: Axis) -> usize {
    distance_idx * 3 + axis.index()
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

impl PublishedTables {
    pub fn pressures(&self) -> Vec<f64> {
        self.wave_speed.iter().map(|r| r.pressure_kgfcm2).collect()
    }

    pub fn wave_speed_row(&self, pressure: f64) -> Option<&WaveSpeedRow> {
        self.wave_speed.iter().find(|r| same(r.pressure_kgfcm2, pressure))
    }

    pub fn flow_for_pressure(&self, pressure: f64) -> Option<f64> {
        self.wave_speed_row(pressure).map(|r| r.flow_lpm)
    }

    pub fn peak_lags(&self, pressure: f64, scenario: Scenario) -> Option<&[Option<f64>]> {
        self.peak_lags_s
            .iter()
            .find(|r| same(r.pressure_kgfcm2, pressure) && r.scenario == scenario)
            .map(|r| r.values.as_slice())
    }

    pub fn leak_distances(&self, pressure: f64) -> Option<&LeakDistanceRow> {
        self.leak_distances.iter().find(|r| same(r.pressure_kgfcm2, pressure))
    }

    pub fn ideal_delays(&self, pressure: f64) -> Option<&IdealDelayRow> {
        self.ideal_delays.iter().find(|r| same(r.pressure_kgfcm2, pressure))
    }

    pub fn distance_index(&self, distance_m: f64) -> Option<usize> {
        self.sensor_distances_m.iter().position(|d| same(*d, distance_m))
    }
}
