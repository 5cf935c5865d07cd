//! Manifest-level localize and calibrate runs.
//!
//! Pairs are processed concurrently; results keep manifest order.

use serde::Serialize;

use crate::calibration::{self, CalibrationTable};
use crate::error::{self, Error, Result};
use crate::hydraulics::{FlowMeasurement, PipeSpec};
use crate::localizer::CalibrationProfile;
use crate::manifest::{LoadedRun, RunOptions};
use crate::pipeline::{self, AxisReport, PipelineOptions};
use crate::signal::{RecordingPair, Scenario};

/// Where the per-pair `t_noLeak` / `t_buffer` values came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationSource {
    File(String),
    /// Fitted from the manifest's own no-leak pairs.
    InRun,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOutcome {
    pub index: usize,
    pub label: String,
    pub scenario: Scenario,
    pub pressure_kgfcm2: f64,
    #[serde(rename = "spacing_L_m")]
    pub spacing_l_m: f64,
    pub per_side_m: Option<f64>,
    pub flow_lpm: f64,
    /// Known leak distance from the right sensor, when the manifest has one.
    pub reference_distance_m: Option<f64>,
    pub calibrated: bool,
    pub axes: Option<Vec<AxisReport>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub calibration: CalibrationSource,
    /// Problems that did not stop the run, such as a failed in-run calibration.
    pub warnings: Vec<String>,
    pub pairs: Vec<PairOutcome>,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.pairs.iter().filter(|p| p.error.is_some()).count()
    }
}

fn load_all(run: &LoadedRun) -> Vec<Result<RecordingPair>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = run.pairs.iter().map(|p| s.spawn(move || p.load())).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("loader panicked"))
            .collect()
    })
}

pub fn load_calibration(path: &std::path::Path) -> Result<CalibrationTable> {
    let text = error::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::schema(format!("{}: {e}", path.display())))
}

fn pipe(run: &LoadedRun) -> Result<PipeSpec> {
    PipeSpec::new(run.manifest.pipe_diameter_m).map_err(|e| Error::schema(e.to_string()))
}

/// Filter, correlate, classify, calibrate and localize every pair.
pub fn localize_run(run: &LoadedRun, overrides: &RunOptions) -> Result<RunReport> {
    let options = run.manifest.options.overridden_by(overrides);
    let opts = options.pipeline_options();
    let spec = pipe(run)?;
    let loaded = load_all(run);
    let mut warnings = Vec::new();

    let (table, source) = if let Some(path) = &run.calibration {
        (Some(load_calibration(path)?), CalibrationSource::File(path.display().to_string()))
    } else {
        let baselines: Vec<RecordingPair> = loaded
            .iter()
            .filter_map(|p| p.as_ref().ok())
            .filter(|p| p.scenario() == Scenario::NoLeak)
            .cloned()
            .collect();
        if baselines.is_empty() {
            (None, CalibrationSource::None)
        } else {
            match calibration::calibrate(&baselines, &[], &spec, &opts) {
                Ok(t) => (Some(t), CalibrationSource::InRun),
                Err(e) => {
                    warnings.push(format!("in-run calibration failed: {e}"));
                    (None, CalibrationSource::None)
                }
            }
        }
    };

    let pairs = std::thread::scope(|s| {
        let handles: Vec<_> = run
            .pairs
            .iter()
            .zip(&loaded)
            .enumerate()
            .map(|(index, (src, pair))| {
                let (table, options, opts, spec) = (&table, &options, &opts, &spec);
                s.spawn(move || {
                    let mut outcome = PairOutcome {
                        index,
                        label: src.label.clone(),
                        scenario: src.scenario,
                        pressure_kgfcm2: src.pressure_kgfcm2,
                        spacing_l_m: src.geometry.spacing_l_m(),
                        per_side_m: src.geometry.per_side_m(),
                        flow_lpm: src.flow_lpm,
                        reference_distance_m: src.geometry.reference_leak_distance_m(),
                        calibrated: false,
                        axes: None,
                        error: None,
                    };
                    let pair = match pair {
                        Ok(p) => p,
                        Err(e) => {
                            outcome.error = Some(e.to_string());
                            return outcome;
                        }
                    };
                    let found = table
                        .as_ref()
                        .and_then(|t| t.profiles_for(src.pressure_kgfcm2, src.geometry.spacing_l_m()));
                    outcome.calibrated = found.is_some();
                    let mut profiles = found.unwrap_or([CalibrationProfile::default(); 3]);
                    if let Some(b) = options.t_buffer_s {
                        for p in &mut profiles {
                            p.t_buffer_s = b;
                        }
                    }
                    match localize_one(pair, &profiles, spec, opts) {
                        Ok(axes) => outcome.axes = Some(axes.to_vec()),
                        Err(e) => outcome.error = Some(e.to_string()),
                    }
                    outcome
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pair worker panicked"))
            .collect()
    });

    Ok(RunReport {
        calibration: source,
        warnings,
        pairs,
    })
}

fn localize_one(
    pair: &RecordingPair,
    profiles: &[CalibrationProfile; 3],
    spec: &PipeSpec,
    opts: &PipelineOptions,
) -> Result<[AxisReport; 3]> {
    let flow = FlowMeasurement::new(pair.flow_lpm(), pair.pressure_kgfcm2())?;
    Ok(pipeline::localize_pair(pair, profiles, &flow, spec, opts)?)
}

/// Fits a calibration table from the run's no-leak pairs and, for the buffer
/// time, its leak pairs with a known leak position.
pub fn calibrate_run(run: &LoadedRun, overrides: &RunOptions) -> Result<CalibrationTable> {
    let options = run.manifest.options.overridden_by(overrides);
    let opts = options.pipeline_options();
    let spec = pipe(run)?;
    let mut baselines = Vec::new();
    let mut known = Vec::new();
    for pair in load_all(run) {
        let pair = pair?;
        match pair.scenario() {
            Scenario::NoLeak => baselines.push(pair),
            Scenario::Leak if pair.geometry.true_leak_from_left_m().is_some() => known.push(pair),
            Scenario::Leak => {}
        }
    }
    let mut table = calibration::calibrate(&baselines, &known, &spec, &opts)?;
    if let Some(b) = options.t_buffer_s {
        for e in &mut table.entries {
            e.t_buffer_s = b;
        }
    }
    Ok(table)
}
