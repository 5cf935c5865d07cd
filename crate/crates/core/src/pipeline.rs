//! Per-axis processing chain for one recording pair:
//! filter, correlate, find the peak, classify, calibrate the delay, localize.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{
    self, FilterError, InterferenceProfile, InterferenceSource, ProfileOptions,
    DEFAULT_NOTCH_BANDWIDTH_HZ,
};
use crate::hydraulics::{self, FlowMeasurement, PipeSpec};
use crate::localizer::{self, CalibrationProfile, LocalizationResult, LocalizeError};
use crate::signal::{Axis, RecordingPair, TriAxialSeries};
use crate::xcorr::{
    self, CorrelationFunction, CorrelationOptions, DelayEstimate, XcorrError, DEFAULT_THRESHOLD_S,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Xcorr(#[from] XcorrError),
    #[error(transparent)]
    Localize(#[from] LocalizeError),
}

/// Where the notch profile for a pair comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterPlan {
    /// Mean removal only.
    MeanOnly,
    /// A profile estimated elsewhere, typically from a no-leak baseline.
    Profile(InterferenceProfile),
    /// Estimate the lines from the pair's left recording and notch both
    /// channels with the same profile.
    EstimateFromPair(ProfileOptions),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub threshold_s: f64,
    pub filter: FilterPlan,
    pub notch_bandwidth_hz: f64,
    pub correlation: CorrelationOptions,
    /// Parabolic sub-sample peak refinement; off by default so reported lags
    /// stay on the sample grid.
    pub interpolate_peak: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            threshold_s: DEFAULT_THRESHOLD_S,
            filter: FilterPlan::EstimateFromPair(ProfileOptions::default()),
            notch_bandwidth_hz: DEFAULT_NOTCH_BANDWIDTH_HZ,
            correlation: CorrelationOptions::default(),
            interpolate_peak: false,
        }
    }
}

/// Everything derived for one axis of one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub axis: Axis,
    pub estimate: DelayEstimate,
    /// Peak lag fed to calibration (refined when interpolation is on).
    pub measured_delay_s: f64,
    pub calibration: CalibrationProfile,
    pub localization: LocalizationResult,
}

/// Filtered left/right series ready for correlation.
pub fn prepare_pair(
    pair: &RecordingPair,
    opts: &PipelineOptions,
) -> Result<(TriAxialSeries, TriAxialSeries), PipelineError> {
    let profile = match &opts.filter {
        FilterPlan::MeanOnly => InterferenceProfile::empty(InterferenceSource::Combined),
        FilterPlan::Profile(p) => p.clone(),
        FilterPlan::EstimateFromPair(po) => {
            let window = po.window.min(pair.len());
            filter::estimate_profile_with(
                &pair.left.series,
                InterferenceSource::Combined,
                &ProfileOptions { window, ..*po },
            )?
            .with_pressure(pair.pressure_kgfcm2())
        }
    };
    let left = filter::filter_series_with(&pair.left.series, &profile, opts.notch_bandwidth_hz)?;
    let right = filter::filter_series_with(&pair.right.series, &profile, opts.notch_bandwidth_hz)?;
    Ok((left, right))
}

/// Correlates sensor 1 (right) against sensor 2 (left), so a positive lag
/// means the feature reached the left sensor later.
pub fn correlate_axis(
    left: &TriAxialSeries,
    right: &TriAxialSeries,
    axis: Axis,
    opts: &PipelineOptions,
) -> Result<(CorrelationFunction, DelayEstimate, f64), PipelineError> {
    let corr = xcorr::cross_correlate(
        &right.axis(axis),
        &left.axis(axis),
        left.sample_rate_hz(),
        axis,
        opts.correlation,
    )?;
    let peak = xcorr::classify(xcorr::find_peak(&corr)?, opts.threshold_s)?;
    let measured = if opts.interpolate_peak {
        xcorr::refine_peak_parabolic(&corr, &peak)
    } else {
        peak.peak_lag_s
    };
    Ok((corr, peak, measured))
}

/// Filter, correlate and classify all three axes without localizing.
pub fn detect_pair(
    pair: &RecordingPair,
    opts: &PipelineOptions,
) -> Result<[(CorrelationFunction, DelayEstimate, f64); 3], PipelineError> {
    let (left, right) = prepare_pair(pair, opts)?;
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = Axis::ALL
            .map(|axis| {
                let (l, r) = (&left, &right);
                s.spawn(move || correlate_axis(l, r, axis, opts))
            })
            .into_iter()
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("axis worker panicked"))
            .collect()
    });
    let mut it = results.into_iter();
    Ok([
        it.next().unwrap()?,
        it.next().unwrap()?,
        it.next().unwrap()?,
    ])
}

/// Full chain for one pair. `calibration` is indexed by [`Axis::index`].
pub fn localize_pair(
    pair: &RecordingPair,
    calibration: &[CalibrationProfile; 3],
    flow: &FlowMeasurement,
    spec: &PipeSpec,
    opts: &PipelineOptions,
) -> Result<[AxisReport; 3], PipelineError> {
    let c = hydraulics::wave_speed(flow, spec);
    let spacing = pair.geometry.spacing_l_m();
    let truth = pair.geometry.reference_leak_distance_m();
    let detected = detect_pair(pair, opts)?;

    let build = |axis: Axis| -> Result<AxisReport, PipelineError> {
        let (_, estimate, measured) = &detected[axis.index()];
        let cal = calibration[axis.index()];
        let dt = localizer::corrected_delay(*measured, &cal);
        let mut loc = localizer::localize(spacing, c, dt)?.with_axis(axis);
        if let Some(d) = truth.filter(|d| *d != 0.0) {
            loc = loc.scored(d)?;
        }
        Ok(AxisReport {
            axis,
            estimate: *estimate,
            measured_delay_s: *measured,
            calibration: cal,
            localization: loc,
        })
    };
    Ok([build(Axis::X)?, build(Axis::Y)?, build(Axis::Z)?])
}
