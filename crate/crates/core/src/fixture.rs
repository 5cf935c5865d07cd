//! On-disk simulated scenarios: `left.csv`, `right.csv` and `manifest.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{self, Error, Result};
use crate::signal::{
    self, DeploymentGeometry, RecordingMeta, RecordingPair, Scenario, Side,
};
use crate::simulator::{ScenarioConfig, SimulatedScenario};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LEFT_FILE: &str = "left.csv";
pub const RIGHT_FILE: &str = "right.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub scenario: Scenario,
    #[serde(rename = "spacing_L_m")]
    pub spacing_l_m: f64,
    pub per_side_m: Option<f64>,
    pub leak_from_left_m: Option<f64>,
    pub pressure_kgfcm2: f64,
    pub flow_lpm: f64,
    pub pipe_diameter_m: f64,
    pub wave_speed_mps: f64,
    pub sample_rate_hz: f64,
    pub clock_skew_s: f64,
    pub rng_seed: u64,
    /// `(d_left - d_right) / c` without clock skew.
    pub ground_truth_dt_s: Option<f64>,
    /// Sensor files relative to the manifest: `[left, right]`.
    pub files: [String; 2],
    /// Full generator settings, enough to regenerate the recordings.
    pub config: ScenarioConfig,
}

impl FixtureManifest {
    pub fn from_simulation(sim: &SimulatedScenario) -> Self {
        let cfg = &sim.config;
        Self {
            scenario: sim.scenario(),
            spacing_l_m: cfg.spacing_l_m,
            per_side_m: cfg.per_side_m,
            leak_from_left_m: cfg.leak_from_left_m,
            pressure_kgfcm2: cfg.pressure_kgfcm2,
            flow_lpm: cfg.flow_lpm,
            pipe_diameter_m: cfg.pipe_diameter_m,
            wave_speed_mps: sim.wave_speed_mps,
            sample_rate_hz: cfg.sample_rate_hz,
            clock_skew_s: cfg.clock_skew_s,
            rng_seed: cfg.rng_seed,
            ground_truth_dt_s: sim.ground_truth_dt_s,
            files: [LEFT_FILE.into(), RIGHT_FILE.into()],
            config: cfg.clone(),
        }
    }

    pub fn geometry(&self) -> Result<DeploymentGeometry> {
        Ok(DeploymentGeometry::new(
            self.spacing_l_m,
            self.per_side_m,
            self.leak_from_left_m,
        )?)
    }

    pub fn left_file(&self) -> &str {
        &self.files[0]
    }

    pub fn right_file(&self) -> &str {
        &self.files[1]
    }

    pub fn meta(&self, side: Side) -> RecordingMeta {
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
}

/// Writes the scenario into `dir`, creating it if needed.
pub fn write_fixture(sim: &SimulatedScenario, dir: &Path) -> Result<FixtureManifest> {
    error::create_dir_all(dir)?;
    let manifest = FixtureManifest::from_simulation(sim);
    error::write(
        &dir.join(manifest.left_file()),
        signal::write_recording_csv(&sim.pair.left.series),
    )?;
    error::write(
        &dir.join(manifest.right_file()),
        signal::write_recording_csv(&sim.pair.right.series),
    )?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    error::write(&dir.join(MANIFEST_FILE), json + "\n")?;
    Ok(manifest)
}

/// Accepts a fixture directory or the path of its manifest.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn read_fixture_manifest(path: &Path) -> Result<(FixtureManifest, PathBuf)> {
    let file = manifest_path(path);
    let text = error::read_to_string(&file)?;
    let manifest: FixtureManifest = serde_json::from_str(&text)
        .map_err(|e| Error::schema(format!("{}: {e}", file.display())))?;
    let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((manifest, dir))
}

pub fn load_recording_pair(
    left: &Path,
    right: &Path,
    left_meta: RecordingMeta,
    right_meta: RecordingMeta,
    geometry: DeploymentGeometry,
) -> Result<RecordingPair> {
    let parse = |path: &Path, meta| -> Result<_> {
        let text = error::read_to_string(path)?;
        signal::parse_recording(&text, meta).map_err(|source| Error::Data {
            path: path.to_path_buf(),
            source,
        })
    };
    let l = parse(left, left_meta)?;
    let r = parse(right, right_meta)?;
    Ok(signal::align_pair(l, r, geometry)?)
}

pub fn load_fixture(path: &Path) -> Result<(FixtureManifest, RecordingPair)> {
    let (manifest, dir) = read_fixture_manifest(path)?;
    let pair = load_recording_pair(
        &dir.join(manifest.left_file()),
        &dir.join(manifest.right_file()),
        manifest.meta(Side::Left),
        manifest.meta(Side::Right),
        manifest.geometry()?,
    )?;
    Ok((manifest, pair))
}
