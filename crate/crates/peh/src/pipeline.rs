//! Per-event processing shared by the CLI and the sweep: locate the event
//! window, pass the acceleration through a device, and reduce the window to
//! a scalogram, features or an image.

use peh_core::classify::{extract_features, FeatureSpec};
use peh_core::signal::{cwt_morlet, default_freqs, detect_events, render_image, Crop, DetectOpts, Image, Scalogram};
use peh_core::{ExactHold, Quantity, ReducedModel, TimeSeries};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fft::Fft;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureOpts {
    pub omega0: f64,
    pub freqs_hz: Vec<f64>,
    pub features: FeatureSpec,
    pub detect: DetectOpts,
    pub crop: Crop,
    pub image_height: usize,
    pub image_width: usize,
}

impl Default for FeatureOpts {
    fn default() -> Self {
        Self {
            omega0: 6.0,
            freqs_hz: default_freqs(),
            features: FeatureSpec::default(),
            detect: DetectOpts::default(),
            crop: Crop::default(),
            image_height: 224,
            image_width: 224,
        }
    }
}

impl FeatureOpts {
    pub fn window_len(&self, sample_rate: f64) -> usize {
        ((self.detect.pre_s + self.detect.post_s) * sample_rate).round() as usize
    }
}

/// Index of the first sample of the event window, or `None` when no event
/// is found. A record that is exactly one window long is taken as is.
pub fn window_start(accel: &TimeSeries, opts: &FeatureOpts) -> Result<Option<usize>> {
    if accel.len() == opts.window_len(accel.sample_rate) {
        return Ok(Some(0));
    }
    let events = detect_events(accel, &opts.detect)?;
    Ok(events.first().map(|e| ((e.start - accel.start_time) * accel.sample_rate).round() as usize))
}

/// Device voltage for the whole record, or the acceleration itself without a device.
pub fn device_signal(model: Option<&ReducedModel>, accel: &TimeSeries) -> Result<TimeSeries> {
    let Some(model) = model else { return Ok(accel.clone()) };
    let mut lti = ExactHold::new(model, accel.sample_rate)?;
    let values = lti.run(&accel.values);
    Ok(TimeSeries { quantity: Quantity::Voltage, start_time: accel.start_time, sample_rate: accel.sample_rate, values })
}

pub fn event_scalogram(
    fft: &dyn Fft,
    model: Option<&ReducedModel>,
    accel: &TimeSeries,
    start: usize,
    opts: &FeatureOpts,
) -> Result<Scalogram> {
    let signal = device_signal(model, accel)?;
    let len = opts.window_len(accel.sample_rate);
    let window = signal.slice(start, len).ok_or_else(|| {
        peh_core::Error::WindowOutOfRange {
            start: accel.time(start),
            end: accel.time(start) + len as f64 / accel.sample_rate,
            series_start: accel.start_time,
            series_end: accel.end_time(),
        }
    })?;
    Ok(cwt_morlet(fft, &window, &opts.freqs_hz, opts.omega0)?)
}

pub fn scalogram_features(sc: &Scalogram, opts: &FeatureOpts) -> Result<Vec<f64>> {
    Ok(extract_features(sc, &opts.features)?)
}

pub fn scalogram_image(sc: &Scalogram, opts: &FeatureOpts) -> Result<Image> {
    Ok(render_image(sc, opts.crop, opts.image_height, opts.image_width)?)
}
