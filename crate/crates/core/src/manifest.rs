//! Run manifests, config files and simulation grids.
//!
//! Config text is either JSON or `key = value` lines. Both go through the same
//! serde schema: dotted keys build nested objects and each value is read as
//! JSON when it parses, otherwise as a bare string.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{self, Error, Result};
use crate::filter::{ProfileOptions, DEFAULT_NOTCH_BANDWIDTH_HZ, DEFAULT_TOP_K};
use crate::fixture::{self, FixtureManifest};
use crate::hydraulics::ABS_PIPE_INNER_DIAMETER_M;
use crate::localizer::DEFAULT_EPSILON;
use crate::pipeline::{FilterPlan, PipelineOptions};
use crate::reference;
use crate::signal::{DeploymentGeometry, RecordingMeta, RecordingPair, Scenario, Side};
use crate::simulator::{self, default_tones, ScenarioConfig, SimError, ToneSpec};
use crate::xcorr::DEFAULT_THRESHOLD_S;

/// Parses JSON or `key = value` text into `T`.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::schema(format!("invalid JSON: {e}")))?
    } else {
        key_value_to_json(text)?
    };
    serde_json::from_value(value).map_err(|e| Error::schema(e.to_string()))
}

pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = error::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Schema(msg) => Error::schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn key_value_to_json(text: &str) -> Result<Value> {
    let mut root = Map::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::schema(format!("line {}: expected key = value", i + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::schema(format!("line {}: empty key", i + 1)));
        }
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));

        let parts: Vec<&str> = key.split('.').collect();
        let mut node = &mut root;
        for part in &parts[..parts.len() - 1] {
            let slot = node
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            node = slot
                .as_object_mut()
                .ok_or_else(|| Error::schema(format!("line {}: {key} conflicts with an earlier value", i + 1)))?;
        }
        let leaf = parts[parts.len() - 1].to_string();
        if node.insert(leaf, parsed).is_some() {
            return Err(Error::schema(format!("line {}: duplicate key {key}", i + 1)));
        }
    }
    Ok(Value::Object(root))
}

fn default_diameter() -> f64 {
    ABS_PIPE_INNER_DIAMETER_M
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub threshold_s: Option<f64>,
    pub t_buffer_s: Option<f64>,
    pub epsilon: Option<f64>,
    /// Number of interference lines to notch; 0 disables notching.
    pub top_k: Option<usize>,
    pub notch_bandwidth_hz: Option<f64>,
}

impl RunOptions {
    /// `other` wins where it is set.
    pub fn overridden_by(&self, other: &RunOptions) -> RunOptions {
        RunOptions {
            threshold_s: other.threshold_s.or(self.threshold_s),
            t_buffer_s: other.t_buffer_s.or(self.t_buffer_s),
            epsilon: other.epsilon.or(self.epsilon),
            top_k: other.top_k.or(self.top_k),
            notch_bandwidth_hz: other.notch_bandwidth_hz.or(self.notch_bandwidth_hz),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(DEFAULT_EPSILON)
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        let top_k = self.top_k.unwrap_or(DEFAULT_TOP_K);
        PipelineOptions {
            threshold_s: self.threshold_s.unwrap_or(DEFAULT_THRESHOLD_S),
            filter: if top_k == 0 {
                FilterPlan::MeanOnly
            } else {
                FilterPlan::EstimateFromPair(ProfileOptions {
                    top_k,
                    ..ProfileOptions::default()
                })
            },
            notch_bandwidth_hz: self.notch_bandwidth_hz.unwrap_or(DEFAULT_NOTCH_BANDWIDTH_HZ),
            ..PipelineOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilePairEntry {
    pub left: PathBuf,
    pub right: PathBuf,
    #[serde(default, rename = "spacing_L_m")]
    pub spacing_l_m: Option<f64>,
    #[serde(default)]
    pub per_side_m: Option<f64>,
    #[serde(default)]
    pub true_leak_from_left_m: Option<f64>,
    pub pressure_kgfcm2: f64,
    pub flow_lpm: f64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEntry {
    pub fixture: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairEntry {
    Fixture(FixtureEntry),
    Files(FilePairEntry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default = "default_diameter")]
    pub pipe_diameter_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    #[serde(default)]
    pub options: RunOptions,
    pub pairs: Vec<PairEntry>,
}

/// A manifest pair with paths resolved and labels validated.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSource {
    pub label: String,
    pub left: PathBuf,
    pub right: PathBuf,
    pub geometry: DeploymentGeometry,
    pub pressure_kgfcm2: f64,
    pub flow_lpm: f64,
    pub scenario: Scenario,
}

impl PairSource {
    fn meta(&self, side: Side) -> RecordingMeta {
        RecordingMeta {
            sensor_id: match side {
                Side::Left => "sensor2".into(),
                Side::Right => "sensor1".into(),
            },
            pressure_kgfcm2: self.pressure_kgfcm2,
            flow_lpm: self.flow_lpm,
            scenario: self.scenario,
            side,
        }
    }

    pub fn load(&self) -> Result<RecordingPair> {
        fixture::load_recording_pair(
            &self.left,
            &self.right,
            self.meta(Side::Left),
            self.meta(Side::Right),
            self.geometry,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub calibration: Option<PathBuf>,
    pub pairs: Vec<PairSource>,
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::schema(format!("{what} {} does not exist", path.display())))
    }
}

fn resolve_entry(entry: &PairEntry, base: &Path, index: usize) -> Result<PairSource> {
    match entry {
        PairEntry::Fixture(f) => {
            let path = fixture::manifest_path(&base.join(&f.fixture));
            require_file(&path, "fixture manifest")?;
            let (m, dir) = fixture::read_fixture_manifest(&path)?;
            let left = dir.join(m.left_file());
            let right = dir.join(m.right_file());
            require_file(&left, "sensor file")?;
            require_file(&right, "sensor file")?;
            Ok(PairSource {
                label: f.fixture.display().to_string(),
                left,
                right,
                geometry: m
                    .geometry()
                    .map_err(|e| Error::schema(format!("pair {index}: {e}")))?,
                pressure_kgfcm2: m.pressure_kgfcm2,
                flow_lpm: m.flow_lpm,
                scenario: m.scenario,
            })
        }
        PairEntry::Files(p) => {
            let left = base.join(&p.left);
            let right = base.join(&p.right);
            require_file(&left, "sensor file")?;
            require_file(&right, "sensor file")?;
            let spacing = match (p.spacing_l_m, p.per_side_m) {
                (Some(l), _) => l,
                (None, Some(d)) => 2.0 * d,
                (None, None) => {
                    return Err(Error::schema(format!(
                        "pair {index}: one of spacing_L_m or per_side_m is required"
                    )))
                }
            };
            let geometry = DeploymentGeometry::new(spacing, p.per_side_m, p.true_leak_from_left_m)
                .map_err(|e| Error::schema(format!("pair {index}: {e}")))?;
            Ok(PairSource {
                label: format!("{} | {}", p.left.display(), p.right.display()),
                left,
                right,
                geometry,
                pressure_kgfcm2: p.pressure_kgfcm2,
                flow_lpm: p.flow_lpm,
                scenario: p.scenario,
            })
        }
    }
}

impl LoadedRun {
    /// Resolves a parsed manifest whose relative paths are anchored at `base`.
    pub fn resolve(manifest: RunManifest, base: &Path) -> Result<Self> {
        if !(manifest.pipe_diameter_m.is_finite() && manifest.pipe_diameter_m > 0.0) {
            return Err(Error::schema(format!(
                "pipe_diameter_m must be positive, got {}",
                manifest.pipe_diameter_m
            )));
        }
        let pairs = manifest
            .pairs
            .iter()
            .enumerate()
            .map(|(i, e)| resolve_entry(e, base, i))
            .collect::<Result<Vec<_>>>()?;
        let calibration = match &manifest.calibration {
            Some(c) => {
                let path = base.join(c);
                require_file(&path, "calibration file")?;
                Some(path)
            }
            None => None,
        };
        Ok(Self {
            manifest,
            calibration,
            pairs,
        })
    }
}

/// Loads a run manifest. A single fixture manifest (or fixture directory) is
/// accepted as a one-pair run.
pub fn load_run(path: &Path) -> Result<LoadedRun> {
    if path.is_dir() {
        return single_fixture_run(path);
    }
    let text = error::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let value: Value = if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(|e| Error::schema(format!("{}: {e}", path.display())))?
    } else {
        key_value_to_json(&text)?
    };
    if value.get("files").is_some() && value.get("pairs").is_none() {
        return single_fixture_run(path);
    }
    let manifest: RunManifest = serde_json::from_value(value)
        .map_err(|e| Error::schema(format!("{}: {e}", path.display())))?;
    LoadedRun::resolve(manifest, &base)
}

fn single_fixture_run(path: &Path) -> Result<LoadedRun> {
    let file = fixture::manifest_path(path);
    let (m, dir): (FixtureManifest, PathBuf) = fixture::read_fixture_manifest(&file)?;
    // Label the pair with the fixture directory name when there is one.
    let standard = file.file_name().is_some_and(|n| n == fixture::MANIFEST_FILE);
    let (base, entry) = match (dir.file_name(), dir.parent()) {
        (Some(name), Some(parent)) if standard => (parent.to_path_buf(), PathBuf::from(name)),
        _ => (dir.clone(), file.file_name().map(PathBuf::from).unwrap_or_default()),
    };
    let manifest = RunManifest {
        pipe_diameter_m: m.pipe_diameter_m,
        calibration: None,
        options: RunOptions::default(),
        pairs: vec![PairEntry::Fixture(FixtureEntry { fixture: entry })],
    };
    LoadedRun::resolve(manifest, &base)
}

/// Grid of simulated scenarios, one fixture directory per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationPlan {
    pub pressures_kgfcm2: Vec<f64>,
    /// Flow per pressure; looked up from the bundled published flows when absent.
    pub flows_lpm: Option<Vec<f64>>,
    pub per_side_m: Vec<f64>,
    /// Leak position as a fraction of the spacing, measured from the left sensor.
    pub leak_fraction_from_left: f64,
    /// Absolute leak position; overrides the fraction.
    pub leak_from_left_m: Option<f64>,
    pub include_leak: bool,
    pub include_no_leak: bool,
    /// Extra delay on the left sensor of leak scenarios only.
    pub leak_extra_offset_s: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub clock_skew_s: f64,
    pub interference_tones: Vec<ToneSpec>,
    pub leak_band_hz: [f64; 2],
    pub leak_rms_g: f64,
    pub snr_db: f64,
    pub machine_noise_rms_g: f64,
    pub attenuation_per_m: f64,
    pub dc_bias_g: [f64; 3],
    pub pipe_diameter_m: f64,
    /// Scenario `i` uses `rng_seed + i`.
    pub rng_seed: u64,
    pub options: RunOptions,
}

impl Default for SimulationPlan {
    fn default() -> Self {
        let base = ScenarioConfig::default();
        Self {
            pressures_kgfcm2: vec![0.6, 1.0, 1.4],
            flows_lpm: None,
            per_side_m: vec![0.5, 1.0, 1.5, 2.0],
            leak_fraction_from_left: 0.25,
            leak_from_left_m: None,
            include_leak: true,
            include_no_leak: true,
            leak_extra_offset_s: 0.0,
            sample_rate_hz: base.sample_rate_hz,
            duration_s: base.duration_s,
            clock_skew_s: base.clock_skew_s,
            interference_tones: default_tones(),
            leak_band_hz: base.leak_band_hz,
            leak_rms_g: base.leak_rms_g,
            snr_db: base.snr_db,
            machine_noise_rms_g: base.machine_noise_rms_g,
            attenuation_per_m: base.attenuation_per_m,
            dc_bias_g: base.dc_bias_g,
            pipe_diameter_m: base.pipe_diameter_m,
            rng_seed: base.rng_seed,
            options: RunOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedScenario {
    pub name: String,
    pub config: ScenarioConfig,
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl SimulationPlan {
    fn flow_for(&self, index: usize, pressure: f64) -> std::result::Result<f64, SimError> {
        match &self.flows_lpm {
            Some(flows) => flows.get(index).copied().ok_or_else(|| {
                SimError::InvalidConfig(format!(
                    "{} flows given for {} pressures",
                    flows.len(),
                    self.pressures_kgfcm2.len()
                ))
            }),
            None => reference::tables().flow_for_pressure(pressure).ok_or_else(|| {
                SimError::InvalidConfig(format!(
                    "no published flow for pressure {pressure}; set flows_lpm"
                ))
            }),
        }
    }

    /// Expands the grid in (pressure, spacing, leak then no-leak) order.
    pub fn scenarios(&self) -> std::result::Result<Vec<PlannedScenario>, SimError> {
        if !self.include_leak && !self.include_no_leak {
            return Err(SimError::InvalidConfig("grid includes neither leak nor no-leak scenarios".into()));
        }
        let mut out = Vec::new();
        for (pi, &p) in self.pressures_kgfcm2.iter().enumerate() {
            let flow = self.flow_for(pi, p)?;
            for &d in &self.per_side_m {
                let spacing = 2.0 * d;
                let mut kinds = Vec::new();
                if self.include_leak {
                    kinds.push(Scenario::Leak);
                }
                if self.include_no_leak {
                    kinds.push(Scenario::NoLeak);
                }
                for kind in kinds {
                    let leak = match kind {
                        Scenario::Leak => Some(
                            self.leak_from_left_m
                                .unwrap_or(self.leak_fraction_from_left * spacing),
                        ),
                        Scenario::NoLeak => None,
                    };
                    let extra = if leak.is_some() { self.leak_extra_offset_s } else { 0.0 };
                    let config = ScenarioConfig {
                        spacing_l_m: spacing,
                        leak_from_left_m: leak,
                        wave_speed_mps: None,
                        sample_rate_hz: self.sample_rate_hz,
                        duration_s: self.duration_s,
                        clock_skew_s: self.clock_skew_s + extra,
                        interference_tones: self.interference_tones.clone(),
                        leak_band_hz: self.leak_band_hz,
                        leak_rms_g: self.leak_rms_g,
                        snr_db: self.snr_db,
                        machine_noise_rms_g: self.machine_noise_rms_g,
                        attenuation_per_m: self.attenuation_per_m,
                        dc_bias_g: self.dc_bias_g,
                        rng_seed: self.rng_seed.wrapping_add(out.len() as u64),
                        pressure_kgfcm2: p,
                        flow_lpm: flow,
                        pipe_diameter_m: self.pipe_diameter_m,
                        per_side_m: Some(d),
                    };
                    config.validate()?;
                    out.push(PlannedScenario {
                        name: format!("p{}_d{}_{}", fmt_num(p), fmt_num(d), kind.as_str()),
                        config,
                    });
                }
            }
        }
        Ok(out)
    }
}

pub const RUN_MANIFEST_FILE: &str = "run.json";

/// Simulates every scenario of the plan into `out_dir/<name>/` and writes a
/// run manifest listing them.
pub fn write_plan(plan: &SimulationPlan, out_dir: &Path) -> Result<(RunManifest, Vec<FixtureManifest>)> {
    let scenarios = plan.scenarios()?;
    error::create_dir_all(out_dir)?;
    let sims = std::thread::scope(|s| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|sc| s.spawn(move || simulator::simulate(&sc.config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect::<Vec<_>>()
    });
    let mut fixtures = Vec::new();
    let mut pairs = Vec::new();
    for (sc, sim) in scenarios.iter().zip(sims) {
        let sim = sim?;
        fixtures.push(fixture::write_fixture(&sim, &out_dir.join(&sc.name))?);
        pairs.push(PairEntry::Fixture(FixtureEntry {
            fixture: PathBuf::from(&sc.name),
        }));
    }
    let manifest = RunManifest {
        pipe_diameter_m: plan.pipe_diameter_m,
        calibration: None,
        options: plan.options.clone(),
        pairs,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    error::write(&out_dir.join(RUN_MANIFEST_FILE), json + "\n")?;
    Ok((manifest, fixtures))
}
