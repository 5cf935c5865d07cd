use std::fs;
use std::path::Path;

use leakloc::calibration::{self, CalibrationError};
use leakloc::fixture::{self, FixtureManifest};
use leakloc::hydraulics::PipeSpec;
use leakloc::manifest::{self, RunOptions, SimulationPlan};
use leakloc::pipeline::{self, FilterPlan, PipelineOptions};
use leakloc::run;
use leakloc::simulator::{self, ScenarioConfig, SimError};
use leakloc::xcorr::Classification;
use leakloc::{Axis, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FS: f64 = 100.0;
const SAMPLE: f64 = 1.0 / FS;

fn peak_lags(cfg: &ScenarioConfig, opts: &PipelineOptions) -> Vec<f64> {
    let sim = simulator::simulate(cfg).unwrap();
    pipeline::detect_pair(&sim.pair, opts)
        .unwrap()
        .iter()
        .map(|(_, _, lag)| *lag)
        .collect()
}

fn within(lags: &[f64], want: f64, tol: f64) -> bool {
    lags.iter().all(|l| (l - want).abs() <= tol + 1e-9)
}

#[test]
fn fixture_round_trip_is_bit_identical() {
    let cfg = ScenarioConfig {
        duration_s: 480.0,
        leak_from_left_m: Some(0.8),
        ..ScenarioConfig::default()
    };
    let sim = simulator::simulate(&cfg).unwrap();
    assert_eq!(sim.pair.len(), 48_000);
    let dir = tempfile::tempdir().unwrap();
    fixture::write_fixture(&sim, dir.path()).unwrap();
    let (manifest, pair) = fixture::load_fixture(dir.path()).unwrap();
    assert_eq!(manifest, FixtureManifest::from_simulation(&sim));
    assert_eq!(pair.left.series.samples(), sim.pair.left.series.samples());
    assert_eq!(pair.right.series.samples(), sim.pair.right.series.samples());
    assert_eq!(pair.sample_rate_hz(), FS);
    assert_eq!(pair.geometry, sim.pair.geometry);
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn same_seed_writes_identical_bytes() {
    let cfg = ScenarioConfig {
        duration_s: 20.0,
        leak_from_left_m: Some(0.5),
        ..ScenarioConfig::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    fixture::write_fixture(&simulator::simulate(&cfg).unwrap(), a.path()).unwrap();
    fixture::write_fixture(&simulator::simulate(&cfg).unwrap(), b.path()).unwrap();
    let (da, db) = (read_dir_bytes(a.path()), read_dir_bytes(b.path()));
    assert_eq!(da.len(), 3);
    assert_eq!(da, db);
}

#[test]
fn manifest_schema() {
    let cfg = ScenarioConfig {
        duration_s: 2.0,
        clock_skew_s: -0.14,
        ..ScenarioConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    fixture::write_fixture(&simulator::simulate(&cfg).unwrap(), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join(fixture::MANIFEST_FILE)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "scenario",
        "spacing_L_m",
        "per_side_m",
        "leak_from_left_m",
        "pressure_kgfcm2",
        "flow_lpm",
        "pipe_diameter_m",
        "clock_skew_s",
        "rng_seed",
        "files",
        "ground_truth_dt_s",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["files"], serde_json::json!(["left.csv", "right.csv"]));
    assert_eq!(v["scenario"], "no_leak");
    assert!(v["ground_truth_dt_s"].is_null());
    assert_eq!(v["clock_skew_s"], -0.14);
}

#[test]
fn recovered_delays() {
    let opts = PipelineOptions::default();
    let base = ScenarioConfig {
        duration_s: 60.0,
        ..ScenarioConfig::default()
    };

    let mid = ScenarioConfig {
        leak_from_left_m: Some(1.0),
        ..base.clone()
    };
    assert!(within(&peak_lags(&mid, &opts), 0.0, SAMPLE));

    let quarter = ScenarioConfig {
        spacing_l_m: 4.0,
        leak_from_left_m: Some(1.0),
        wave_speed_mps: Some(0.437),
        ..base.clone()
    };
    let truth = simulator::simulate(&quarter).unwrap().ground_truth_dt_s.unwrap();
    assert!((truth - (2.0 - 4.0) / 0.437).abs() < 1e-12);
    assert!((truth + 4.577).abs() < 1e-3);
    assert!(within(&peak_lags(&quarter, &opts), truth, SAMPLE));

    let skewed = ScenarioConfig {
        clock_skew_s: -0.14,
        ..base.clone()
    };
    assert!(within(&peak_lags(&skewed, &opts), -0.14, SAMPLE));
}

#[test]
fn interference_alone_peaks_at_zero_lag() {
    let cfg = ScenarioConfig {
        duration_s: 60.0,
        ..ScenarioConfig::default()
    };
    let raw = PipelineOptions {
        filter: FilterPlan::MeanOnly,
        ..PipelineOptions::default()
    };
    let sim = simulator::simulate(&cfg).unwrap();
    for (_, est, _) in pipeline::detect_pair(&sim.pair, &raw).unwrap() {
        assert_eq!(est.peak_lag_samples, 0);
        assert_eq!(est.classification, Some(Classification::NoLeak));
    }
}

#[test]
fn delay_fidelity_over_seeded_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let opts = PipelineOptions::default();
    let speeds = [0.4337, 0.3519, 0.2777];
    let mut hits = 0;
    for trial in 0..100u64 {
        let spacing = [1.0, 2.0, 3.0, 4.0][rng.random_range(0..4)];
        let cfg = ScenarioConfig {
            spacing_l_m: spacing,
            leak_from_left_m: Some(rng.random_range(0.0..=spacing)),
            wave_speed_mps: Some(speeds[rng.random_range(0..3)]),
            duration_s: 60.0,
            rng_seed: 5000 + trial,
            ..ScenarioConfig::default()
        };
        let truth = simulator::simulate(&cfg).unwrap().ground_truth_dt_s.unwrap();
        if within(&peak_lags(&cfg, &opts), truth, SAMPLE) {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits} of 100 trials within one sample");
}

#[test]
fn doubled_leak_amplitude_quadruples_band_power() {
    let cfg = ScenarioConfig {
        duration_s: 30.0,
        leak_from_left_m: Some(0.6),
        interference_tones: Vec::new(),
        machine_noise_rms_g: 0.0,
        snr_db: 300.0,
        dc_bias_g: [0.0; 3],
        ..ScenarioConfig::default()
    };
    let a = simulator::simulate(&cfg).unwrap();
    let b = simulator::simulate(&ScenarioConfig {
        leak_rms_g: 0.2,
        ..cfg
    })
    .unwrap();
    for axis in Axis::ALL {
        for (x, y) in [(&a.pair.left, &b.pair.left), (&a.pair.right, &b.pair.right)] {
            let pa = leakloc::band_power(&x.series.axis(axis), FS, 5.0, 25.0);
            let pb = leakloc::band_power(&y.series.axis(axis), FS, 5.0, 25.0);
            assert!((pb / pa - 4.0).abs() < 1e-6);
        }
    }
}

fn small_plan() -> SimulationPlan {
    SimulationPlan {
        pressures_kgfcm2: vec![0.6, 1.4],
        per_side_m: vec![0.5, 1.5],
        duration_s: 60.0,
        ..SimulationPlan::default()
    }
}

#[test]
fn zero_skew_calibrates_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    manifest::write_plan(
        &SimulationPlan {
            include_leak: false,
            ..small_plan()
        },
        dir.path(),
    )
    .unwrap();
    let run = manifest::load_run(&dir.path().join(manifest::RUN_MANIFEST_FILE)).unwrap();
    let table = run::calibrate_run(&run, &RunOptions::default()).unwrap();
    assert_eq!(table.entries.len(), 12);
    for e in &table.entries {
        assert!(e.t_no_leak_s.abs() <= SAMPLE, "{e:?}");
        assert_eq!(e.buffer_fit_pairs, 0);
    }
}

#[test]
fn injected_offset_is_fitted_as_buffer() {
    let dir = tempfile::tempdir().unwrap();
    manifest::write_plan(
        &SimulationPlan {
            clock_skew_s: -0.14,
            leak_extra_offset_s: 0.05,
            ..small_plan()
        },
        dir.path(),
    )
    .unwrap();
    let run = manifest::load_run(&dir.path().join(manifest::RUN_MANIFEST_FILE)).unwrap();
    let table = run::calibrate_run(&run, &RunOptions::default()).unwrap();
    assert_eq!(table.entries.len(), 12);
    for e in &table.entries {
        assert!((e.t_no_leak_s + 0.14).abs() <= SAMPLE, "{e:?}");
        assert!((e.t_buffer_s - 0.05).abs() <= 2.0 * SAMPLE, "{e:?}");
        assert_eq!(e.buffer_fit_pairs, 1);
    }
}

#[test]
fn leak_condition_without_baseline() {
    let mk = |per_side: f64, leak: Option<f64>| {
        let cfg = ScenarioConfig {
            leak_from_left_m: leak,
            duration_s: 20.0,
            ..ScenarioConfig::equidistant(per_side, 1.0, 18.5)
        };
        simulator::simulate(&cfg).unwrap().pair
    };
    let spec = PipeSpec::new(0.0334).unwrap();
    let err = calibration::calibrate(
        &[mk(0.5, None)],
        &[mk(1.0, Some(0.5))],
        &spec,
        &PipelineOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, CalibrationError::MissingBaseline { spacing_l_m, .. } if spacing_l_m == 2.0));
}

#[test]
fn default_grid_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let plan = SimulationPlan {
        duration_s: 5.0,
        ..SimulationPlan::default()
    };
    let (run_manifest, fixtures) = manifest::write_plan(&plan, dir.path()).unwrap();
    assert_eq!(fixtures.len(), 24);
    assert_eq!(fixtures.iter().filter(|f| f.scenario == Scenario::Leak).count(), 12);
    assert_eq!(run_manifest.pairs.len(), 24);
    let mut pressures: Vec<f64> = fixtures.iter().map(|f| f.pressure_kgfcm2).collect();
    pressures.dedup();
    assert_eq!(pressures, [0.6, 1.0, 1.4]);
    assert!(dir.path().join("p1.4_d2_no_leak").join("left.csv").is_file());
    let loaded = manifest::load_run(&dir.path().join("run.json")).unwrap();
    assert_eq!(loaded.pairs.len(), 24);
}

#[test]
fn leak_beyond_spacing_is_rejected() {
    let cfg = ScenarioConfig {
        spacing_l_m: 1.0,
        leak_from_left_m: Some(1.2),
        ..ScenarioConfig::default()
    };
    assert!(matches!(simulator::simulate(&cfg), Err(SimError::InvalidConfig(_))));
}
