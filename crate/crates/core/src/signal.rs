//! Event windows, Morlet scalograms, classifier images and strain-pair
//! speed estimation.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::{bin_omega, forward_real, Fft};
use crate::response::require_quantity;
use crate::series::{Quantity, TimeSeries};

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Speed class used as the classification target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeedClass {
    C30,
    C40,
    C50,
    Excluded,
}

impl SpeedClass {
    /// The three trainable classes in index order.
    pub const LABELED: [SpeedClass; 3] = [SpeedClass::C30, SpeedClass::C40, SpeedClass::C50];

    /// Closed speed interval in km/h, `None` for [`SpeedClass::Excluded`].
    pub fn interval(self) -> Option<(f64, f64)> {
        match self {
            SpeedClass::C30 => Some((30.0, 38.0)),
            SpeedClass::C40 => Some((42.0, 48.0)),
            SpeedClass::C50 => Some((50.0, 60.0)),
            SpeedClass::Excluded => None,
        }
    }

    pub fn index(self) -> Option<usize> {
        SpeedClass::LABELED.iter().position(|c| *c == self)
    }

    pub fn name(self) -> &'static str {
        match self {
            SpeedClass::C30 => "C30",
            SpeedClass::C40 => "C40",
            SpeedClass::C50 => "C50",
            SpeedClass::Excluded => "Excluded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedLabel {
    pub speed_kmh: f64,
    pub class: SpeedClass,
}

/// Bin a speed into its class; anything outside the three closed intervals is excluded.
pub fn label_speed(speed_kmh: f64) -> SpeedLabel {
    let class = SpeedClass::LABELED
        .into_iter()
        .find(|c| {
            let (lo, hi) = c.interval().unwrap();
            speed_kmh >= lo && speed_kmh <= hi
        })
        .unwrap_or(SpeedClass::Excluded);
    SpeedLabel { speed_kmh, class }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectOpts {
    /// Threshold in units of the robust noise scale.
    pub k: f64,
    pub mad_window_s: f64,
    /// Spacing at which the rolling noise scale is re-evaluated.
    pub mad_hop_s: f64,
    pub min_separation_s: f64,
    pub pre_s: f64,
    pub post_s: f64,
    /// Lower bound on the noise scale relative to the record's peak, so a
    /// noise-free trace does not trigger on numerical tails.
    pub floor_rel: f64,
}

impl Default for DetectOpts {
    fn default() -> Self {
        Self {
            k: 6.0,
            mad_window_s: 60.0,
            mad_hop_s: 5.0,
            min_separation_s: 25.0,
            pre_s: 10.0,
            post_s: 15.0,
            floor_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventWindow {
    pub peak_time: f64,
    pub start: f64,
    pub end: f64,
    pub accel: TimeSeries,
}

/// Consistency factor turning a median absolute deviation into a Gaussian σ.
const MAD_TO_SIGMA: f64 = 1.4826;

fn median_in_place(v: &mut [f64]) -> f64 {
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Robust noise scale `1.4826 · MAD` of a slice.
pub fn robust_sigma(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut buf = x.to_vec();
    let med = median_in_place(&mut buf);
    for (b, v) in buf.iter_mut().zip(x) {
        *b = (v - med).abs();
    }
    MAD_TO_SIGMA * median_in_place(&mut buf)
}

/// Find vehicle passages and cut fixed-length windows around their first peak.
pub fn detect_events(accel: &TimeSeries, opts: &DetectOpts) -> Result<Vec<EventWindow>> {
    require_quantity(accel, Quantity::Acceleration)?;
    let fs = accel.sample_rate;
    let n = accel.len();
    let pre = libm::round(opts.pre_s * fs) as usize;
    let post = libm::round(opts.post_s * fs) as usize;
    let win_len = pre + post;
    if n < win_len || n < 3 {
        return Ok(Vec::new());
    }
    let x = &accel.values;
    let hop = (libm::round(opts.mad_hop_s * fs) as usize).max(1);
    let half = (libm::round(0.5 * opts.mad_window_s * fs) as usize).max(1);
    let floor = opts.floor_rel * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let thresholds: Vec<f64> = (0..n.div_ceil(hop))
        .map(|b| {
            let centre = b * hop + hop / 2;
            let lo = centre.saturating_sub(half);
            let hi = (centre + half).min(n);
            opts.k * robust_sigma(&x[lo..hi]).max(floor)
        })
        .collect();
    let min_sep = libm::round(opts.min_separation_s * fs) as usize;
    let mut events = Vec::new();
    let mut next_allowed = 0usize;
    let mut i = 1;
    while i + 1 < n {
        let a = x[i].abs();
        if i >= next_allowed && a > thresholds[i / hop] && a >= x[i - 1].abs() && a >= x[i + 1].abs() {
            if i >= pre && i + post <= n {
                let accel_win = accel.slice(i - pre, win_len).unwrap();
                let peak_time = accel.time(i);
                events.push(EventWindow {
                    peak_time,
                    start: accel_win.start_time,
                    end: accel_win.start_time + win_len as f64 / fs,
                    accel: accel_win,
                });
            }
            next_allowed = i + min_sep;
            i = next_allowed.max(i + 1);
            continue;
        }
        i += 1;
    }
    Ok(events)
}

/// Default scalogram frequency axis, 1..=200 Hz in 1 Hz steps.
pub fn default_freqs() -> Vec<f64> {
    (1..=200).map(|f| f as f64).collect()
}

/// Complex wavelet coefficients, row `i` for `freqs_hz[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexScalogram {
    pub freqs_hz: Vec<f64>,
    pub times_s: Vec<f64>,
    pub coeffs: Vec<Vec<Complex64>>,
}

/// |CWT| on a (frequency × time) grid, stored row-major by frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalogram {
    pub freqs_hz: Vec<f64>,
    pub times_s: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl Scalogram {
    pub fn n_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn n_times(&self) -> usize {
        self.times_s.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_times();
        &self.magnitude[i * w..(i + 1) * w]
    }

    pub fn at(&self, fi: usize, ti: usize) -> f64 {
        self.magnitude[fi * self.n_times() + ti]
    }

    /// Frequency of the largest magnitude at time index `ti`.
    pub fn ridge_hz(&self, ti: usize) -> f64 {
        let (best, _) = (0..self.n_freqs()).fold((0, f64::MIN), |(bi, bv), fi| {
            let v = self.at(fi, ti);
            if v > bv { (fi, v) } else { (bi, bv) }
        });
        self.freqs_hz[best]
    }
}

/// Fourier transform of the analytic Morlet wavelet.
fn morlet_hat(omega: f64, omega0: f64) -> f64 {
    // π^(-1/4) · sqrt(2π)
    const NORM: f64 = 1.882_724_703_178_639_6;
    let d = omega - omega0;
    NORM * libm::exp(-0.5 * d * d)
}

fn check_freqs(freqs_hz: &[f64], fs: f64) -> Result<()> {
    if freqs_hz.is_empty() {
        return Err(invalid("freqs_hz", "empty frequency grid"));
    }
    let nyquist = 0.5 * fs;
    for &f in freqs_hz {
        if !(f > 0.0) {
            return Err(invalid("freqs_hz", "frequencies must be positive"));
        }
        if f > nyquist {
            return Err(Error::FrequencyOutOfRange { frequency_hz: f, nyquist_hz: nyquist });
        }
    }
    Ok(())
}

/// Visit the complex CWT row for each frequency.
///
/// Coefficients are `W(s, t) = (1/s) ∫ x(τ) ψ*((τ − t)/s) dτ` with
/// `s = ω₀ / (2πf)`, evaluated as a product in the frequency domain. The
/// signal is zero-padded well past the longest wavelet support so the
/// circular wrap never reaches the record.
fn cwt_rows(
    fft: &dyn Fft,
    x: &TimeSeries,
    freqs_hz: &[f64],
    omega0: f64,
    mut visit: impl FnMut(usize, &[Complex64]),
) -> Result<()> {
    x.validate()?;
    check_freqs(freqs_hz, x.sample_rate)?;
    if !(omega0 > 0.0) {
        return Err(invalid("omega0", "must be positive"));
    }
    let fs = x.sample_rate;
    let n = x.len();
    let f_min = freqs_hz.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_max = omega0 / (TWO_PI * f_min);
    let pad = libm::ceil(5.0 * s_max * fs) as usize;
    let len = fft.fast_len(n + pad);
    let spectrum = forward_real(fft, &x.values, len);
    let omegas: Vec<f64> = (0..len).map(|k| bin_omega(k, len, fs)).collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let inv_len = 1.0 / len as f64;
    for (fi, &f) in freqs_hz.iter().enumerate() {
        let s = omega0 / (TWO_PI * f);
        for ((b, xk), w) in buf.iter_mut().zip(&spectrum).zip(&omegas) {
            let g = morlet_hat(s * w, omega0);
            *b = if g < 1e-300 { Complex64::new(0.0, 0.0) } else { xk * (g * inv_len) };
        }
        fft.process(&mut buf, true);
        visit(fi, &buf[..n]);
    }
    Ok(())
}

fn time_axis(x: &TimeSeries) -> Vec<f64> {
    (0..x.len()).map(|i| x.time(i)).collect()
}

/// Complex Morlet coefficients.
pub fn cwt_complex(fft: &dyn Fft, x: &TimeSeries, freqs_hz: &[f64], omega0: f64) -> Result<ComplexScalogram> {
    let mut coeffs = Vec::with_capacity(freqs_hz.len());
    cwt_rows(fft, x, freqs_hz, omega0, |_, row| coeffs.push(row.to_vec()))?;
    Ok(ComplexScalogram { freqs_hz: freqs_hz.to_vec(), times_s: time_axis(x), coeffs })
}

/// Morlet scalogram magnitude, L1-normalized so a unit tone gives the same
/// ridge height at every scale.
pub fn cwt_morlet(fft: &dyn Fft, x: &TimeSeries, freqs_hz: &[f64], omega0: f64) -> Result<Scalogram> {
    let mut magnitude = Vec::with_capacity(freqs_hz.len() * x.len());
    cwt_rows(fft, x, freqs_hz, omega0, |_, row| magnitude.extend(row.iter().map(|c| c.norm())))?;
    Ok(Scalogram { freqs_hz: freqs_hz.to_vec(), times_s: time_axis(x), magnitude })
}

/// Grayscale image, row 0 at the highest frequency, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn at(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.width + c]
    }
}

/// Crop rectangle; times are measured from the first scalogram sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crop {
    pub t0: f64,
    pub t1: f64,
    pub f0: f64,
    pub f1: f64,
}

impl Default for Crop {
    fn default() -> Self {
        Self { t0: 5.0, t1: 25.0, f0: 0.0, f1: 200.0 }
    }
}

/// Fractional index of `x` on an ascending grid, clamped to its ends.
fn grid_pos(grid: &[f64], x: f64) -> f64 {
    let last = grid.len() - 1;
    if last == 0 || x <= grid[0] {
        return 0.0;
    }
    if x >= grid[last] {
        return last as f64;
    }
    let i = grid.partition_point(|g| *g <= x).saturating_sub(1).min(last - 1);
    i as f64 + (x - grid[i]) / (grid[i + 1] - grid[i])
}

/// Bracketing indices and weight for a fractional position on `len` points.
fn lerp_index(pos: f64, len: usize) -> (usize, usize, f64) {
    let i = (libm::floor(pos) as usize).min(len.saturating_sub(2));
    let frac = pos - i as f64;
    (i, (i + 1).min(len - 1), frac)
}

fn normalize(data: &mut [f32]) {
    let (lo, hi) = data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        data.iter_mut().for_each(|v| *v = 0.0);
    } else {
        data.iter_mut().for_each(|v| *v = (*v - lo) / range);
    }
}

/// Crop a scalogram, resample bilinearly to `height × width` and scale to `[0, 1]`.
///
/// Frequencies below the lowest scalogram row reuse that row. A constant
/// crop maps to an all-zero image.
pub fn render_image(sc: &Scalogram, crop: Crop, height: usize, width: usize) -> Result<Image> {
    if height < 2 || width < 2 {
        return Err(invalid("size", "image needs at least 2×2 pixels"));
    }
    if !(crop.t1 > crop.t0) || !(crop.f1 > crop.f0) {
        return Err(invalid("crop", "empty crop rectangle"));
    }
    if sc.n_freqs() < 2 || sc.n_times() < 2 {
        return Err(invalid("scalogram", "needs at least two rows and columns"));
    }
    let origin = sc.times_s[0];
    let rel: Vec<f64> = sc.times_s.iter().map(|t| t - origin).collect();
    let dt = rel[1] - rel[0];
    // a window of n samples spans n·dt, one step past its last sample time
    let slack = 1.01 * dt;
    if crop.t0 < -slack || crop.t1 > rel[rel.len() - 1] + slack {
        return Err(Error::Coverage {
            what: alloc::format!("time crop [{}, {}] s outside [0, {}] s", crop.t0, crop.t1, rel[rel.len() - 1]),
        });
    }
    if crop.f1 > sc.freqs_hz[sc.n_freqs() - 1] + 1e-9 {
        return Err(Error::Coverage {
            what: alloc::format!("frequency crop up to {} Hz beyond {} Hz", crop.f1, sc.freqs_hz[sc.n_freqs() - 1]),
        });
    }
    let col_pos: Vec<(usize, usize, f64)> = (0..width)
        .map(|c| {
            let t = crop.t0 + (crop.t1 - crop.t0) * c as f64 / (width - 1) as f64;
            lerp_index(grid_pos(&rel, t), rel.len())
        })
        .collect();
    let mut data = Vec::with_capacity(height * width);
    for r in 0..height {
        let f = crop.f1 - (crop.f1 - crop.f0) * r as f64 / (height - 1) as f64;
        let (f_lo, f_hi, wf) = lerp_index(grid_pos(&sc.freqs_hz, f), sc.n_freqs());
        for &(t_lo, t_hi, wt) in &col_pos {
            let v = (1.0 - wf) * ((1.0 - wt) * sc.at(f_lo, t_lo) + wt * sc.at(f_lo, t_hi))
                + wf * ((1.0 - wt) * sc.at(f_hi, t_lo) + wt * sc.at(f_hi, t_hi));
            data.push(v as f32);
        }
    }
    normalize(&mut data);
    Ok(Image { height, width, data })
}

/// Bilinear resize with corner pixels aligned.
pub fn resize_bilinear(img: &Image, height: usize, width: usize) -> Result<Image> {
    if height < 1 || width < 1 || img.height < 1 || img.width < 1 {
        return Err(invalid("size", "empty image"));
    }
    let pos = |i: usize, n_out: usize, n_in: usize| {
        if n_out == 1 { 0.0 } else { i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64 }
    };
    let mut data = Vec::with_capacity(height * width);
    for r in 0..height {
        let (r0, r1, wr) = lerp_index(pos(r, height, img.height), img.height);
        for c in 0..width {
            let (c0, c1, wc) = lerp_index(pos(c, width, img.width), img.width);
            let (wr, wc) = (wr as f32, wc as f32);
            let v = (1.0 - wr) * ((1.0 - wc) * img.at(r0, c0) + wc * img.at(r0, c1))
                + wr * ((1.0 - wc) * img.at(r1, c0) + wc * img.at(r1, c1));
            data.push(v);
        }
    }
    Ok(Image { height, width, data })
}

/// Zero-phase brick-wall band-pass between `lo_hz` and `hi_hz`.
pub fn bandpass(fft: &dyn Fft, x: &[f64], fs: f64, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let len = fft.fast_len(2 * n);
    let mut spec = forward_real(fft, x, len);
    for (k, v) in spec.iter_mut().enumerate() {
        let f = bin_omega(k, len, fs).abs() / TWO_PI;
        if f < lo_hz || f > hi_hz {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    fft.process(&mut spec, true);
    spec[..n].iter().map(|c| c.re / len as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedOpts {
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub min_correlation: f64,
    /// Relative disagreement between sensor pairs above which an event is flagged.
    pub max_pair_disagreement: f64,
}

impl Default for SpeedOpts {
    fn default() -> Self {
        Self { band_lo_hz: 0.5, band_hi_hz: 30.0, min_correlation: 0.5, max_pair_disagreement: 0.1 }
    }
}

/// Time delay of `b` behind `a` from the normalized cross-correlation peak,
/// refined to sub-sample precision with a parabola through the peak.
/// Returns `(delay_s, peak_correlation)`.
pub fn correlation_delay(fft: &dyn Fft, a: &TimeSeries, b: &TimeSeries, opts: &SpeedOpts) -> Result<(f64, f64)> {
    a.validate()?;
    b.validate()?;
    if (a.sample_rate - b.sample_rate).abs() > 1e-9 * a.sample_rate {
        return Err(invalid("sample_rate", "strain channels must share a sample rate"));
    }
    if a.len() < 3 || b.len() < 3 {
        return Err(invalid("strain", "need at least three samples per channel"));
    }
    let fs = a.sample_rate;
    let xa = bandpass(fft, &a.values, fs, opts.band_lo_hz, opts.band_hi_hz);
    let xb = bandpass(fft, &b.values, fs, opts.band_lo_hz, opts.band_hi_hz);
    let norm = libm::sqrt(xa.iter().map(|v| v * v).sum::<f64>() * xb.iter().map(|v| v * v).sum::<f64>());
    if !(norm > 0.0) {
        return Err(Error::UnreliableCorrelation { peak: 0.0, threshold: opts.min_correlation });
    }
    // r[k] = Σ a[n] b[n + k] via conj(A)·B
    let (na, nb) = (xa.len(), xb.len());
    let len = fft.fast_len(na + nb);
    let fa = forward_real(fft, &xa, len);
    let mut fb = forward_real(fft, &xb, len);
    for (y, x) in fb.iter_mut().zip(&fa) {
        *y *= x.conj();
    }
    fft.process(&mut fb, true);
    let r = |lag: isize| {
        let idx = if lag >= 0 { lag as usize } else { (len as isize + lag) as usize };
        fb[idx].re / (len as f64 * norm)
    };
    let lags = -(na as isize - 1)..=(nb as isize - 1);
    let (best_lag, best) = lags.clone().fold((0isize, f64::MIN), |(bl, bv), k| {
        let v = r(k);
        if v > bv { (k, v) } else { (bl, bv) }
    });
    // offset between the two series' first samples
    let origin = b.start_time - a.start_time;
    let mut shift = 0.0;
    if best_lag > *lags.start() && best_lag < *lags.end() {
        let (ym, y0, yp) = (r(best_lag - 1), best, r(best_lag + 1));
        let denom = ym - 2.0 * y0 + yp;
        if denom < 0.0 {
            shift = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
        }
    }
    let delay = origin + (best_lag as f64 + shift) / fs;
    Ok((delay, best))
}

/// Speed from one sensor pair, km/h.
pub fn estimate_speed(fft: &dyn Fft, a: &TimeSeries, b: &TimeSeries, spacing_m: f64, opts: &SpeedOpts) -> Result<f64> {
    require_quantity(a, Quantity::Strain)?;
    require_quantity(b, Quantity::Strain)?;
    if !(spacing_m > 0.0) {
        return Err(invalid("spacing_m", "must be positive"));
    }
    let (delay, peak) = correlation_delay(fft, a, b, opts)?;
    if peak < opts.min_correlation {
        return Err(Error::UnreliableCorrelation { peak, threshold: opts.min_correlation });
    }
    if delay <= 0.0 {
        return Err(Error::Direction { delay_s: delay });
    }
    Ok(3.6 * spacing_m / delay)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub speed_kmh: f64,
    pub pair_speeds_kmh: Vec<Option<f64>>,
    /// Pairs disagree beyond tolerance or one pair failed.
    pub flagged: bool,
    pub label: SpeedLabel,
}

/// Average the estimates of independent sensor pairs.
pub fn estimate_speed_pairs(
    fft: &dyn Fft,
    pairs: &[(&TimeSeries, &TimeSeries)],
    spacing_m: f64,
    opts: &SpeedOpts,
) -> Result<SpeedEstimate> {
    if pairs.is_empty() {
        return Err(invalid("pairs", "no sensor pairs"));
    }
    let mut first_err = None;
    let mut speeds = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        match estimate_speed(fft, a, b, spacing_m, opts) {
            Ok(v) => speeds.push(Some(v)),
            Err(e) => {
                first_err.get_or_insert(e);
                speeds.push(None);
            }
        }
    }
    let ok: Vec<f64> = speeds.iter().flatten().cloned().collect();
    if ok.is_empty() {
        return Err(first_err.unwrap());
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    let spread = ok.iter().cloned().fold(f64::MIN, f64::max) - ok.iter().cloned().fold(f64::MAX, f64::min);
    let flagged = ok.len() < speeds.len() || spread / mean > opts.max_pair_disagreement;
    Ok(SpeedEstimate { speed_kmh: mean, pair_speeds_kmh: speeds, flagged, label: label_speed(mean) })
}

impl core::fmt::Display for SpeedClass {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for SpeedClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C30" => Ok(SpeedClass::C30),
            "C40" => Ok(SpeedClass::C40),
            "C50" => Ok(SpeedClass::C50),
            "Excluded" => Ok(SpeedClass::Excluded),
            other => Err(invalid("class", other.to_string())),
        }
    }
}
