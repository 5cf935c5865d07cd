//! Leak detection and localization from two three-axis vibration sensors
//! mounted either side of a suspected leak.
//!
//! The chain is: ingest and align the pair ([`signal`]), notch machinery
//! interference ([`filter`]), cross-correlate each axis ([`xcorr`]), convert
//! the peak lag into a position using the flow-derived wave speed
//! ([`hydraulics`], [`localizer`]) after subtracting a no-leak baseline
//! ([`calibration`]). [`simulator`] produces recordings with known ground
//! truth.

pub mod calibration;
pub mod error;
pub mod filter;
pub mod fixture;
pub mod hydraulics;
pub mod localizer;
pub mod manifest;
pub mod pipeline;
pub mod reference;
pub mod reproduce;
pub mod run;
pub mod signal;
pub mod simulator;
mod spectral;
pub mod xcorr;

pub use error::{Error, Result};
pub use signal::{Axis, RecordingPair, Scenario, Side, TriAxialSeries};
pub use spectral::band_power;
