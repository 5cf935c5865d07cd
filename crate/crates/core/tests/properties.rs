use leakloc::filter::{self, InterferenceProfile, InterferenceSource};
use leakloc::hydraulics::{self, FlowMeasurement, PipeSpec};
use leakloc::localizer::{self, CalibrationProfile};
use leakloc::signal::{
    self, DeploymentGeometry, RecordingMeta, Scenario, SensorRecording, Side,
};
use leakloc::xcorr::{self, CorrelationMethod, CorrelationOptions};
use leakloc::{Axis, TriAxialSeries};
use proptest::prelude::*;

fn signal_pair(min: usize, max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (min..=max).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
    })
}

fn non_constant(x: &[f64]) -> bool {
    x.iter().any(|v| (v - x[0]).abs() > 1e-6)
}

fn speed(q: f64, d: f64) -> f64 {
    hydraulics::wave_speed(&FlowMeasurement::new(q, 1.0).unwrap(), &PipeSpec::new(d).unwrap())
}

fn meta(side: Side) -> RecordingMeta {
    RecordingMeta {
        sensor_id: "s".into(),
        pressure_kgfcm2: 1.0,
        flow_lpm: 18.5,
        scenario: Scenario::Leak,
        side,
    }
}

fn recording(side: Side, fs: f64, start: f64, values: &[f64]) -> SensorRecording {
    let samples = values.iter().map(|v| [*v, -v, 2.0 * v]).collect();
    SensorRecording::new(meta(side), TriAxialSeries::new(fs, start, samples).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn localize_inverts_delay_for(l in 0.1f64..10.0, c in 0.01f64..5.0, frac in 0.0f64..=1.0) {
        let d = frac * l;
        let dt = localizer::delay_for(l, c, d).unwrap();
        let back = localizer::localize(l, c, dt).unwrap().d_l_m;
        prop_assert!((back - d).abs() <= 1e-12 * l, "{back} vs {d}");
    }

    #[test]
    fn negated_delay_reflects_about_midpoint(l in 0.1f64..10.0, c in 0.01f64..5.0, dt in -100.0f64..100.0) {
        let a = localizer::localize(l, c, dt).unwrap().d_l_m;
        let b = localizer::localize(l, c, -dt).unwrap().d_l_m;
        prop_assert!((b - (l - a)).abs() <= 1e-12 * a.abs().max(l));
    }

    #[test]
    fn zero_calibration_is_identity(t in -1e3f64..1e3) {
        prop_assert_eq!(localizer::corrected_delay(t, &CalibrationProfile::default()), t);
    }

    #[test]
    fn ideal_bounds_are_symmetric(d in 0.01f64..10.0, c in 0.01f64..5.0, eps in 0.0f64..0.99) {
        let b = localizer::ideal_delay_bounds(d, c, eps, None).unwrap();
        prop_assert_eq!(b.dt_min_s, -b.dt_max_s);
        prop_assert!((b.d_min_m + b.d_max_m - 2.0 * d).abs() <= 4.0 * f64::EPSILON * d);
    }

    #[test]
    fn roundtrip_scores_zero_error(l in 0.1f64..10.0, c in 0.01f64..5.0, frac in 0.01f64..=1.0) {
        let d = frac * l;
        let dt = localizer::delay_for(l, c, d).unwrap();
        let got = localizer::localize(l, c, dt).unwrap().d_l_m;
        prop_assert!(localizer::error_percent(d, got).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn wave_speed_is_linear_in_flow(q in 0.0f64..200.0, k in 0.0f64..20.0, p in -4i32..8) {
        let d = hydraulics::ABS_PIPE_INNER_DIAMETER_M;
        let rhs = k * speed(q, d);
        prop_assert!((speed(k * q, d) - rhs).abs() <= 1e-12 * rhs);
        // Power-of-two factors scale without rounding.
        let two = 2f64.powi(p);
        prop_assert_eq!(speed(two * q, d), two * speed(q, d));
    }

    #[test]
    fn wave_speed_is_inverse_square_in_diameter(q in 0.1f64..200.0, d in 0.001f64..1.0) {
        let a = speed(q, d);
        let b = speed(q, 2.0 * d);
        prop_assert!((b - a / 4.0).abs() <= 1e-12 * a);
    }

    #[test]
    fn correlation_is_time_reversal_symmetric((a, b) in signal_pair(2, 300)) {
        prop_assume!(non_constant(&a) && non_constant(&b));
        let opts = CorrelationOptions::default();
        let f = xcorr::cross_correlate(&a, &b, 100.0, Axis::X, opts).unwrap();
        let r = xcorr::cross_correlate(&b, &a, 100.0, Axis::X, opts).unwrap();
        let n = f.values.len();
        for i in 0..n {
            prop_assert_eq!(f.values[i], r.values[n - 1 - i]);
            prop_assert_eq!(f.lags_s[i], -r.lags_s[n - 1 - i]);
        }
    }

    #[test]
    fn swapping_inputs_negates_peak((a, b) in signal_pair(2, 300)) {
        prop_assume!(non_constant(&a) && non_constant(&b));
        let opts = CorrelationOptions::default();
        let f = xcorr::find_peak(&xcorr::cross_correlate(&a, &b, 50.0, Axis::Z, opts).unwrap()).unwrap();
        let r = xcorr::find_peak(&xcorr::cross_correlate(&b, &a, 50.0, Axis::Z, opts).unwrap()).unwrap();
        // A tie between +k and -k resolves to -k in both directions.
        if f.peak_lag_samples != 0 && f.peak_lag_samples == r.peak_lag_samples {
            prop_assert_eq!(f.peak_value, r.peak_value);
        } else {
            prop_assert_eq!(f.peak_lag_samples, -r.peak_lag_samples);
        }
    }

    #[test]
    fn normalized_values_are_bounded((a, b) in signal_pair(2, 300)) {
        prop_assume!(non_constant(&a) && non_constant(&b));
        let c = xcorr::cross_correlate(&a, &b, 100.0, Axis::Y, CorrelationOptions::default()).unwrap();
        prop_assert!(c.values.iter().all(|v| v.abs() <= 1.0 + 1e-9));
        let auto = xcorr::cross_correlate(&a, &a, 100.0, Axis::Y, CorrelationOptions::default()).unwrap();
        prop_assert!((auto.at_lag(0).unwrap() - 1.0).abs() <= 1e-12);
        let peak = xcorr::find_peak(&auto).unwrap();
        prop_assert_eq!(peak.peak_lag_samples, 0);
    }

    #[test]
    fn fft_path_matches_direct((a, b) in signal_pair(2, 400)) {
        let opts = |method| CorrelationOptions { normalized: false, method };
        let f = xcorr::cross_correlate(&a, &b, 10.0, Axis::X, opts(CorrelationMethod::Fft)).unwrap();
        let d = xcorr::cross_correlate(&a, &b, 10.0, Axis::X, opts(CorrelationMethod::Direct)).unwrap();
        let scale = d.values.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        for (x, y) in f.values.iter().zip(&d.values) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn delaying_second_input_moves_peak(
        x in prop::collection::vec(-1.0f64..1.0, 600),
        k in -40i64..=40,
    ) {
        prop_assume!(non_constant(&x));
        let n = 512;
        let s1 = &x[44..44 + n];
        let start = (44 - k) as usize;
        let s2 = &x[start..start + n];
        let c = xcorr::cross_correlate(s1, s2, 100.0, Axis::X, CorrelationOptions::default()).unwrap();
        let p = xcorr::find_peak(&c).unwrap();
        prop_assert_eq!(p.peak_lag_samples, k);
        prop_assert_eq!(p.peak_lag_s, k as f64 / 100.0);
    }

    #[test]
    fn filtering_is_linear(
        (x, y) in signal_pair(64, 400),
        alpha in -5.0f64..5.0,
        beta in -5.0f64..5.0,
        f1 in 1.0f64..20.0,
        f2 in 21.0f64..45.0,
    ) {
        let profile = InterferenceProfile::from_frequencies(InterferenceSource::Combined, &[f1, f2]);
        let series = |v: &[f64]| {
            TriAxialSeries::from_axes(100.0, 3.5, [v.to_vec(), v.iter().map(|s| -s).collect(), v.to_vec()]).unwrap()
        };
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let fx = filter::filter_series(&series(&x), &profile).unwrap();
        let fy = filter::filter_series(&series(&y), &profile).unwrap();
        let fm = filter::filter_series(&series(&mix), &profile).unwrap();
        prop_assert_eq!(fm.len(), mix.len());
        prop_assert_eq!(fm.sample_rate_hz(), 100.0);
        prop_assert_eq!(fm.start_time_s(), 3.5);
        for axis in Axis::ALL {
            let (a, b, m) = (fx.axis(axis), fy.axis(axis), fm.axis(axis));
            let scale = m.iter().chain(&a).chain(&b).fold(1.0f64, |s, v| s.max(v.abs()));
            for i in 0..m.len() {
                prop_assert!((m[i] - (alpha * a[i] + beta * b[i])).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn csv_round_trip(
        values in prop::collection::vec(-1e3f64..1e3, 2..200),
        fs in 1u32..=1000,
        start_steps in -1000i32..1000,
    ) {
        let fs = fs as f64;
        let rec = recording(Side::Left, fs, start_steps as f64 / 8.0, &values);
        let text = signal::write_recording_csv(&rec.series);
        let parsed = signal::parse_recording(&text, meta(Side::Left)).unwrap();
        prop_assert_eq!(parsed.series.samples(), rec.series.samples());
        prop_assert_eq!(parsed.series.len(), values.len());
        let again = signal::parse_recording(&signal::write_recording_csv(&parsed.series), meta(Side::Left)).unwrap();
        prop_assert_eq!(again, parsed);
    }

    #[test]
    fn alignment_is_idempotent_and_never_fabricates(
        left in prop::collection::vec(-1.0f64..1.0, 1..120),
        right in prop::collection::vec(-1.0f64..1.0, 1..120),
        offset in -60i32..60,
        frac in 0.0f64..0.4,
    ) {
        let fs = 100.0;
        let l = recording(Side::Left, fs, 0.0, &left);
        let r = recording(Side::Right, fs, (offset as f64 + frac) / fs, &right);
        let geometry = DeploymentGeometry::equidistant(1.0).unwrap();
        let Ok(pair) = signal::align_pair(l.clone(), r.clone(), geometry) else {
            return Ok(());
        };
        prop_assert_eq!(pair.left.series.len(), pair.right.series.len());
        prop_assert_eq!(pair.left.series.sample_rate_hz(), pair.right.series.sample_rate_hz());
        prop_assert!(pair.start_offset_s.abs() <= 0.5 / fs + 1e-12);
        for (out, src) in [(&pair.left, &l), (&pair.right, &r)] {
            let skip = ((out.series.start_time_s() - src.series.start_time_s()) * fs).round() as usize;
            prop_assert_eq!(out.series.samples(), &src.series.samples()[skip..skip + out.series.len()]);
        }
        let again = signal::align_pair(pair.left.clone(), pair.right.clone(), geometry).unwrap();
        prop_assert_eq!(again, pair);
    }
}
