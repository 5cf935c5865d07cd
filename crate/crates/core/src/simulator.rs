//! Synthetic two-sensor rig with known ground truth.
//!
//! The leak is band-limited random vibration that reaches sensor 1 (right)
//! after `d_right / c` and sensor 2 (left) after `d_left / c`. Machinery
//! interference (tones plus a broadband rumble) couples into both sensors
//! with no relative delay. Sensor 2 additionally runs `clock_skew_s` late,
//! which shifts everything it records. Each sensor adds its own white noise.
//!
//! Sources are synthesized in the frequency domain over a period of at least
//! twice the recording length, so any fractional delay is an exact
//! band-limited phase shift and circular wrap never aligns with a real lag.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::InterferenceSource;
use crate::hydraulics::{self, FlowMeasurement, PipeSpec, ABS_PIPE_INNER_DIAMETER_M};
use crate::signal::{
    DeploymentGeometry, RecordingMeta, RecordingPair, Scenario, SensorRecording, Side,
    TriAxialSeries,
};
use crate::spectral;

pub const MIN_SAMPLES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidConfig(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSpec {
    pub source: InterferenceSource,
    pub frequency_hz: f64,
    pub amplitude_g: f64,
}

pub fn default_tones() -> Vec<ToneSpec> {
    vec![
        ToneSpec {
            source: InterferenceSource::Motor,
            frequency_hz: 12.5,
            amplitude_g: 0.3,
        },
        ToneSpec {
            source: InterferenceSource::Pump,
            frequency_hz: 23.7,
            amplitude_g: 0.2,
        },
        ToneSpec {
            source: InterferenceSource::Valve,
            frequency_hz: 37.1,
            amplitude_g: 0.1,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "spacing_L_m")]
    pub spacing_l_m: f64,
    /// Leak position measured from the left sensor; `None` means no leak.
    pub leak_from_left_m: Option<f64>,
    /// Propagation speed; derived from `flow_lpm` and `pipe_diameter_m` when
    /// absent so that simulated and analysed speeds agree.
    pub wave_speed_mps: Option<f64>,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub clock_skew_s: f64,
    pub interference_tones: Vec<ToneSpec>,
    pub leak_band_hz: [f64; 2],
    pub leak_rms_g: f64,
    /// Sensor noise relative to `leak_rms_g`.
    pub snr_db: f64,
    /// Broadband machinery vibration common to both sensors.
    pub machine_noise_rms_g: f64,
    /// Optional amplitude decay `exp(-a * distance)` of the leak signal.
    pub attenuation_per_m: f64,
    pub dc_bias_g: [f64; 3],
    pub rng_seed: u64,
    pub pressure_kgfcm2: f64,
    pub flow_lpm: f64,
    pub pipe_diameter_m: f64,
    pub per_side_m: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            spacing_l_m: 2.0,
            leak_from_left_m: None,
            wave_speed_mps: None,
            sample_rate_hz: 100.0,
            duration_s: 120.0,
            clock_skew_s: 0.0,
            interference_tones: default_tones(),
            leak_band_hz: [5.0, 25.0],
            leak_rms_g: 0.1,
            snr_db: 20.0,
            machine_noise_rms_g: 0.02,
            attenuation_per_m: 0.0,
            dc_bias_g: [0.0, 0.0, 1.0],
            rng_seed: 42,
            pressure_kgfcm2: 1.0,
            flow_lpm: 18.5,
            pipe_diameter_m: ABS_PIPE_INNER_DIAMETER_M,
            per_side_m: None,
        }
    }
}

impl ScenarioConfig {
    /// Equidistant deployment `per_side_m` either side of the marked point.
    pub fn equidistant(per_side_m: f64, pressure_kgfcm2: f64, flow_lpm: f64) -> Self {
        Self {
            spacing_l_m: 2.0 * per_side_m,
            per_side_m: Some(per_side_m),
            pressure_kgfcm2,
            flow_lpm,
            ..Self::default()
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn resolved_wave_speed(&self) -> Result<f64, SimError> {
        match self.wave_speed_mps {
            Some(c) => Ok(c),
            None => {
                let spec = PipeSpec::new(self.pipe_diameter_m).map_err(|e| invalid(e.to_string()))?;
                let flow = FlowMeasurement::new(self.flow_lpm, self.pressure_kgfcm2)
                    .map_err(|e| invalid(e.to_string()))?;
                Ok(hydraulics::wave_speed(&flow, &spec))
            }
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fs = self.sample_rate_hz;
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.spacing_l_m) {
            return Err(invalid(format!("spacing must be positive, got {}", self.spacing_l_m)));
        }
        if let Some(d) = self.leak_from_left_m {
            if !(d.is_finite() && (0.0..=self.spacing_l_m).contains(&d)) {
                return Err(invalid(format!(
                    "leak position {d} m outside [0, {}] m",
                    self.spacing_l_m
                )));
            }
        }
        let c = self.resolved_wave_speed()?;
        if !finite_pos(c) {
            return Err(invalid(format!("wave speed must be positive, got {c}")));
        }
        if !finite_pos(fs) || !finite_pos(self.duration_s) {
            return Err(invalid("sample rate and duration must be positive"));
        }
        if self.sample_count() < MIN_SAMPLES {
            return Err(invalid(format!(
                "duration x rate gives {} samples, need at least {MIN_SAMPLES}",
                self.sample_count()
            )));
        }
        for t in &self.interference_tones {
            if !(t.frequency_hz > 0.0 && t.frequency_hz < fs / 2.0) {
                return Err(invalid(format!(
                    "tone at {} Hz must lie in (0, {}) Hz",
                    t.frequency_hz,
                    fs / 2.0
                )));
            }
            if !(t.amplitude_g.is_finite() && t.amplitude_g >= 0.0) {
                return Err(invalid("tone amplitude must be finite and non-negative"));
            }
        }
        let [lo, hi] = self.leak_band_hz;
        if !(lo >= 0.0 && lo < hi && hi <= fs / 2.0) {
            return Err(invalid(format!("leak band [{lo}, {hi}] Hz is not inside [0, fs/2]")));
        }
        let non_neg = |v: f64| v.is_finite() && v >= 0.0;
        if !non_neg(self.leak_rms_g) || !non_neg(self.machine_noise_rms_g) || !non_neg(self.attenuation_per_m) {
            return Err(invalid("amplitudes and attenuation must be finite and non-negative"));
        }
        if !self.snr_db.is_finite() || !self.clock_skew_s.is_finite() {
            return Err(invalid("snr and clock skew must be finite"));
        }
        if !self.dc_bias_g.iter().all(|b| b.is_finite()) {
            return Err(invalid("dc bias must be finite"));
        }
        self.geometry().map(|_| ())
    }

    fn geometry(&self) -> Result<DeploymentGeometry, SimError> {
        DeploymentGeometry::new(self.spacing_l_m, self.per_side_m, self.leak_from_left_m)
            .map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedScenario {
    pub config: ScenarioConfig,
    pub wave_speed_mps: f64,
    pub pair: RecordingPair,
    /// `(d_left - d_right) / c`, excluding clock skew. `None` without a leak.
    pub ground_truth_dt_s: Option<f64>,
}

impl SimulatedScenario {
    pub fn scenario(&self) -> Scenario {
        self.pair.scenario()
    }
}

/// Independent random stream per signal component, so adding or removing one
/// component never perturbs the others.
fn stream(seed: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component);
    rng
}

const STREAM_LEAK: u64 = 1;
const STREAM_MACHINE: u64 = 2;
const STREAM_TONES: u64 = 3;
const STREAM_GAINS: u64 = 4;
const STREAM_NOISE: u64 = 5;

/// One-sided random spectrum with unit time-domain RMS over the period.
fn band_spectrum(rng: &mut ChaCha8Rng, period: usize, fs: f64, lo: f64, hi: f64) -> Vec<Complex64> {
    let half = period / 2;
    let mut spec = vec![Complex64::new(0.0, 0.0); half + 1];
    for (k, slot) in spec.iter_mut().enumerate().take(half).skip(1) {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let f = k as f64 * fs / period as f64;
        if f >= lo && f <= hi {
            *slot = Complex64::new(re, im);
        }
    }
    // Mean power over the period is 2 * sum |X_k|^2 / period^2.
    let energy: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
    if energy > 0.0 {
        let scale = period as f64 / (2.0 * energy).sqrt();
        for c in &mut spec {
            *c *= scale;
        }
    }
    spec
}

/// First `n` samples of the periodic signal described by `spec`, delayed by
/// `delay_s` (band-limited, fractional delays allowed).
fn render(spec: &[Complex64], period: usize, fs: f64, delay_s: f64, n: usize) -> Vec<f64> {
    let half = period / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); period];
    for k in 1..half {
        let f = k as f64 * fs / period as f64;
        let v = spec[k] * Complex64::from_polar(1.0, -2.0 * PI * f * delay_s);
        buf[k] = v;
        buf[period - k] = v.conj();
    }
    spectral::inverse(&mut buf);
    let scale = 1.0 / period as f64;
    buf[..n].iter().map(|c| c.re * scale).collect()
}

pub fn simulate(config: &ScenarioConfig) -> Result<SimulatedScenario, SimError> {
    config.validate()?;
    let c = config.resolved_wave_speed()?;
    let fs = config.sample_rate_hz;
    let n = config.sample_count();
    let period = (2 * n).next_power_of_two();
    let skew = config.clock_skew_s;
    let seed = config.rng_seed;

    // Physical vibration at each sensor, before axis gains: [right, left].
    let mut body = [vec![0.0; n], vec![0.0; n]];

    let ground_truth_dt_s = config.leak_from_left_m.map(|d_left| {
        let d_right = config.spacing_l_m - d_left;
        let [lo, hi] = config.leak_band_hz;
        let spec = band_spectrum(&mut stream(seed, STREAM_LEAK), period, fs, lo, hi);
        let amp = |d: f64| config.leak_rms_g * (-config.attenuation_per_m * d).exp();
        let right = render(&spec, period, fs, d_right / c, n);
        let left = render(&spec, period, fs, d_left / c + skew, n);
        for (acc, v) in body[0].iter_mut().zip(&right) {
            *acc += amp(d_right) * v;
        }
        for (acc, v) in body[1].iter_mut().zip(&left) {
            *acc += amp(d_left) * v;
        }
        (d_left - d_right) / c
    });

    if config.machine_noise_rms_g > 0.0 {
        let spec = band_spectrum(&mut stream(seed, STREAM_MACHINE), period, fs, 0.0, fs / 2.0);
        for (sensor, delay) in [(0usize, 0.0), (1, skew)] {
            let x = render(&spec, period, fs, delay, n);
            for (acc, v) in body[sensor].iter_mut().zip(&x) {
                *acc += config.machine_noise_rms_g * v;
            }
        }
    }

    let mut tone_rng = stream(seed, STREAM_TONES);
    for tone in &config.interference_tones {
        let phase: f64 = tone_rng.random_range(0.0..2.0 * PI);
        let w = 2.0 * PI * tone.frequency_hz;
        for (sensor, delay) in [(0usize, 0.0), (1, skew)] {
            for (i, acc) in body[sensor].iter_mut().enumerate() {
                let t = i as f64 / fs - delay;
                *acc += tone.amplitude_g * (w * t + phase).sin();
            }
        }
    }

    let mut gain_rng = stream(seed, STREAM_GAINS);
    let mut noise_rng = stream(seed, STREAM_NOISE);
    let sigma = config.leak_rms_g * 10f64.powf(-config.snr_db / 20.0);
    let mut axes_of = |sensor: usize| -> [Vec<f64>; 3] {
        std::array::from_fn(|axis| {
            let gain: f64 = gain_rng.random_range(0.5..=1.5);
            body[sensor]
                .iter()
                .map(|v| {
                    let noise: f64 = noise_rng.sample(StandardNormal);
                    gain * v + sigma * noise + config.dc_bias_g[axis]
                })
                .collect()
        })
    };
    let right_axes = axes_of(0);
    let left_axes = axes_of(1);

    let scenario = if config.leak_from_left_m.is_some() {
        Scenario::Leak
    } else {
        Scenario::NoLeak
    };
    let recording = |side: Side, id: &str, axes: [Vec<f64>; 3]| -> Result<SensorRecording, SimError> {
        let series = TriAxialSeries::from_axes(fs, 0.0, axes).map_err(|e| invalid(e.to_string()))?;
        SensorRecording::new(
            RecordingMeta {
                sensor_id: id.to_string(),
                pressure_kgfcm2: config.pressure_kgfcm2,
                flow_lpm: config.flow_lpm,
                scenario,
                side,
            },
            series,
        )
        .map_err(|e| invalid(e.to_string()))
    };
    let pair = RecordingPair {
        left: recording(Side::Left, "sensor2", left_axes)?,
        right: recording(Side::Right, "sensor1", right_axes)?,
        geometry: config.geometry()?,
        start_offset_s: 0.0,
    };

    Ok(SimulatedScenario {
        config: config.clone(),
        wave_speed_mps: c,
        pair,
        ground_truth_dt_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Axis;

    fn quiet(mut cfg: ScenarioConfig) -> ScenarioConfig {
        cfg.interference_tones.clear();
        cfg.machine_noise_rms_g = 0.0;
        cfg.dc_bias_g = [0.0; 3];
        cfg
    }

    #[test]
    fn rendered_source_has_unit_rms_and_exact_integer_shift() {
        let mut rng = stream(7, STREAM_LEAK);
        let period = 1024;
        let spec = band_spectrum(&mut rng, period, 100.0, 5.0, 25.0);
        let x = render(&spec, period, 100.0, 0.0, period);
        assert!((spectral::rms(&x) - 1.0).abs() < 1e-9);
        let y = render(&spec, period, 100.0, 0.05, period);
        for i in 5..period {
            assert!((y[i] - x[i - 5]).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = ScenarioConfig {
            leak_from_left_m: Some(0.5),
            duration_s: 10.0,
            ..ScenarioConfig::default()
        };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.pair, b.pair);
        let c = simulate(&ScenarioConfig { rng_seed: 43, ..cfg }).unwrap();
        assert_ne!(a.pair.left.series, c.pair.left.series);
    }

    #[test]
    fn ground_truth_delay() {
        let cfg = ScenarioConfig {
            spacing_l_m: 4.0,
            leak_from_left_m: Some(1.0),
            wave_speed_mps: Some(0.437),
            duration_s: 10.0,
            ..ScenarioConfig::default()
        };
        let sim = simulate(&cfg).unwrap();
        assert!((sim.ground_truth_dt_s.unwrap() - (2.0 - 4.0) / 0.437).abs() < 1e-12);
        assert_eq!(sim.scenario(), Scenario::Leak);
        assert_eq!(sim.pair.left.side, Side::Left);
        let no_leak = simulate(&ScenarioConfig { leak_from_left_m: None, ..cfg }).unwrap();
        assert_eq!(no_leak.ground_truth_dt_s, None);
        assert_eq!(no_leak.scenario(), Scenario::NoLeak);
    }

    #[test]
    fn wave_speed_defaults_to_flow_over_area() {
        let cfg = ScenarioConfig::equidistant(1.0, 1.4, 14.6);
        let c = cfg.resolved_wave_speed().unwrap();
        assert!((c - 0.2777).abs() < 1e-4);
    }

    #[test]
    fn invalid_configs() {
        let bad = |cfg: ScenarioConfig| matches!(simulate(&cfg), Err(SimError::InvalidConfig(_)));
        let base = ScenarioConfig::default();
        assert!(bad(ScenarioConfig { leak_from_left_m: Some(2.5), ..base.clone() }));
        assert!(bad(ScenarioConfig { duration_s: 0.5, ..base.clone() }));
        assert!(bad(ScenarioConfig { leak_band_hz: [5.0, 60.0], ..base.clone() }));
        assert!(bad(ScenarioConfig { wave_speed_mps: Some(0.0), ..base.clone() }));
        assert!(bad(ScenarioConfig { per_side_m: Some(0.3), ..base.clone() }));
        let mut tones = base.clone();
        tones.interference_tones[0].frequency_hz = 50.0;
        assert!(bad(tones));
    }

    #[test]
    fn doubling_leak_amplitude_quadruples_power() {
        let cfg = quiet(ScenarioConfig {
            leak_from_left_m: Some(0.7),
            duration_s: 20.0,
            ..ScenarioConfig::default()
        });
        let a = simulate(&cfg).unwrap();
        let b = simulate(&ScenarioConfig { leak_rms_g: 0.2, ..cfg }).unwrap();
        for (ra, rb) in [(&a.pair.left, &b.pair.left), (&a.pair.right, &b.pair.right)] {
            let pa = spectral::band_power(&ra.series.axis(Axis::X), 100.0, 5.0, 25.0);
            let pb = spectral::band_power(&rb.series.axis(Axis::X), 100.0, 5.0, 25.0);
            assert!((pb / pa - 4.0).abs() < 1e-9, "{}", pb / pa);
        }
    }

    #[test]
    fn attenuation_weakens_the_far_sensor() {
        let cfg = quiet(ScenarioConfig {
            leak_from_left_m: Some(0.2),
            attenuation_per_m: 1.0,
            snr_db: 200.0,
            duration_s: 20.0,
            ..ScenarioConfig::default()
        });
        let sim = simulate(&cfg).unwrap();
        // Divide out the per-axis gains by comparing against an unattenuated run.
        let flat = simulate(&ScenarioConfig { attenuation_per_m: 0.0, ..cfg }).unwrap();
        let ratio = |a: &SensorRecording, b: &SensorRecording| {
            spectral::rms(&a.series.axis(Axis::Y)) / spectral::rms(&b.series.axis(Axis::Y))
        };
        assert!((ratio(&sim.pair.left, &flat.pair.left) - (-0.2f64).exp()).abs() < 1e-6);
        assert!((ratio(&sim.pair.right, &flat.pair.right) - (-1.8f64).exp()).abs() < 1e-6);
    }
}
