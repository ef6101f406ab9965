//! Labeled synthetic bridge traffic: acceleration at the harvester mount and
//! two strain-gauge pairs per vehicle passage, plus long Poisson traffic
//! streams for energy estimates.
//!
//! The acceleration is a sum of damped bridge modes. Each mode builds up
//! with a `sin²` envelope while the vehicle is on the span (duration
//! `span / speed`) and then rings down freely. Modal weights tilt toward the
//! higher modes as speed increases, which is what makes speed classes
//! separable from the vibration alone.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::series::{Quantity, TimeSeries};
use crate::signal::{label_speed, SpeedClass, SpeedLabel};

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;
/// Envelope level below which a ringing mode is no longer rendered.
const TAIL_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficScenario {
    pub bridge_modal_freqs: Vec<f64>,
    pub modal_damping: Vec<f64>,
    /// Relative modal amplitudes at the reference speed.
    pub modal_weights: Vec<f64>,
    /// Exponent of the speed-dependent tilt `(f / 10 Hz)^(tilt · (v − 45) / 15)`.
    pub speed_tilt: f64,
    pub speed_kmh: f64,
    pub span_m: f64,
    pub axle_spacing_m: f64,
    pub sensor_spacing_m: f64,
    /// Distance from the span entry to the first sensor of each pair.
    pub sensor_offset_m: f64,
    /// Effective length of a single axle's strain influence, as a Gaussian σ.
    pub strain_pulse_m: f64,
    pub accel_amplitude: f64,
    pub strain_amplitude: f64,
    /// Random vehicle-to-vehicle amplitude spread, ± fraction.
    pub amplitude_jitter: f64,
    pub duration_s: f64,
    pub arrival_s: f64,
    pub strain_window_s: f64,
    pub strain_lead_s: f64,
    pub sample_rate: f64,
    /// Signal-to-noise ratio relative to a sinusoid of the nominal amplitude.
    pub noise_snr_db: f64,
    pub rng_seed: u64,
}

impl Default for TrafficScenario {
    fn default() -> Self {
        Self {
            bridge_modal_freqs: vec![2.0, 6.1, 13.5, 21.0, 33.0],
            modal_damping: vec![0.02; 5],
            modal_weights: vec![0.25, 0.35, 0.45, 1.0, 0.3],
            speed_tilt: 0.4,
            speed_kmh: 45.0,
            span_m: 30.0,
            axle_spacing_m: 3.0,
            sensor_spacing_m: 9.0,
            sensor_offset_m: 10.0,
            strain_pulse_m: 0.6,
            accel_amplitude: 0.05,
            strain_amplitude: 50.0,
            amplitude_jitter: 0.2,
            duration_s: 30.0,
            arrival_s: 11.0,
            strain_window_s: 6.0,
            strain_lead_s: 2.0,
            sample_rate: 600.0,
            noise_snr_db: 20.0,
            rng_seed: 0,
        }
    }
}

impl TrafficScenario {
    pub fn validate(&self) -> Result<()> {
        let n = self.bridge_modal_freqs.len();
        if n == 0 || self.modal_damping.len() != n || self.modal_weights.len() != n {
            return Err(invalid("bridge_modal_freqs", "frequencies, damping and weights need equal nonzero length"));
        }
        if self.bridge_modal_freqs.iter().any(|f| !(*f > 0.0 && *f < 0.5 * self.sample_rate)) {
            return Err(invalid("bridge_modal_freqs", "must lie in (0, Nyquist)"));
        }
        if self.modal_damping.iter().any(|z| !(*z > 0.0 && *z < 1.0)) {
            return Err(invalid("modal_damping", "must lie in (0, 1)"));
        }
        for (name, v) in [
            ("speed_kmh", self.speed_kmh),
            ("span_m", self.span_m),
            ("axle_spacing_m", self.axle_spacing_m),
            ("sensor_spacing_m", self.sensor_spacing_m),
            ("strain_pulse_m", self.strain_pulse_m),
            ("duration_s", self.duration_s),
            ("strain_window_s", self.strain_window_s),
            ("sample_rate", self.sample_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return Err(invalid("amplitude_jitter", "must lie in [0, 1)"));
        }
        if !self.noise_snr_db.is_finite() {
            return Err(invalid("noise_snr_db", "must be finite"));
        }
        Ok(())
    }

    /// Modal amplitudes for a vehicle at `speed_kmh`, before jitter.
    pub fn weights_at(&self, speed_kmh: f64) -> Vec<f64> {
        let x = (speed_kmh - 45.0) / 15.0;
        self.bridge_modal_freqs
            .iter()
            .zip(&self.modal_weights)
            .map(|(f, w)| w * libm::exp(self.speed_tilt * x * libm::log(f / 10.0)))
            .collect()
    }

    /// Frequency of the largest modal weight at the reference speed.
    pub fn dominant_freq_hz(&self) -> f64 {
        let i = (0..self.modal_weights.len())
            .fold(0, |b, i| if self.modal_weights[i] > self.modal_weights[b] { i } else { b });
        self.bridge_modal_freqs[i]
    }

    fn noise_sigma(&self, amplitude: f64) -> f64 {
        amplitude / core::f64::consts::SQRT_2 / libm::pow(10.0, self.noise_snr_db / 20.0)
    }
}

/// One vehicle passage as seen by the bridge modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub arrival_s: f64,
    pub speed_kmh: f64,
    pub mode_amps: Vec<f64>,
    pub phases: Vec<f64>,
}

impl Vehicle {
    pub fn draw(scn: &TrafficScenario, arrival_s: f64, speed_kmh: f64, rng: &mut impl Rng) -> Self {
        let scale = scn.accel_amplitude * (1.0 + scn.amplitude_jitter * (2.0 * rng.random::<f64>() - 1.0));
        let mode_amps = scn.weights_at(speed_kmh).into_iter().map(|w| w * scale).collect();
        let phases = scn.bridge_modal_freqs.iter().map(|_| TWO_PI * rng.random::<f64>()).collect();
        Self { arrival_s, speed_kmh, mode_amps, phases }
    }

    pub fn crossing_time(&self, span_m: f64) -> f64 {
        span_m / (self.speed_kmh / 3.6)
    }

    /// Time after arrival beyond which every mode is negligible.
    pub fn extent(&self, scn: &TrafficScenario) -> f64 {
        let ring = scn
            .bridge_modal_freqs
            .iter()
            .zip(&scn.modal_damping)
            .map(|(f, z)| -libm::log(TAIL_CUTOFF) / (z * TWO_PI * f))
            .fold(0.0, f64::max);
        self.crossing_time(scn.span_m) + ring
    }

    /// Add this vehicle's acceleration to `out`, whose first entry is
    /// sample number `offset` of a record starting at t = 0.
    pub fn render(&self, scn: &TrafficScenario, offset: usize, out: &mut [f64]) {
        let fs = scn.sample_rate;
        let t_cross = self.crossing_time(scn.span_m);
        for (i, (&f, &zeta)) in scn.bridge_modal_freqs.iter().zip(&scn.modal_damping).enumerate() {
            let omega = TWO_PI * f;
            let omega_d = omega * libm::sqrt(1.0 - zeta * zeta);
            let decay = zeta * omega;
            let t_end = self.arrival_s + t_cross - libm::log(TAIL_CUTOFF) / decay;
            // absolute sample range, so chunked rendering matches a single pass
            let first = (libm::ceil(self.arrival_s * fs).max(0.0) as usize).saturating_sub(offset);
            let last = ((libm::floor(t_end * fs).max(-1.0) + 1.0) as usize).saturating_sub(offset);
            let (amp, phase) = (self.mode_amps[i], self.phases[i]);
            let stop = last.min(out.len());
            for (j, o) in out.iter_mut().enumerate().take(stop).skip(first) {
                let tau = (offset + j) as f64 / fs - self.arrival_s;
                let env = if tau <= t_cross {
                    let s = libm::sin(0.5 * core::f64::consts::PI * tau / t_cross);
                    s * s
                } else {
                    libm::exp(-decay * (tau - t_cross))
                };
                *o += amp * env * libm::sin(omega_d * tau + phase);
            }
        }
    }
}

/// Strain channels of one passage, ordered `[pair0_a, pair0_b, pair1_a, pair1_b]`.
fn render_strains(scn: &TrafficScenario, vehicle: &Vehicle, rng: &mut impl Rng) -> [TimeSeries; 4] {
    let fs = scn.sample_rate;
    let v = vehicle.speed_kmh / 3.6;
    let n = libm::round(scn.strain_window_s * fs) as usize;
    let t_first = vehicle.arrival_s + scn.sensor_offset_m / v;
    let start = t_first - scn.strain_lead_s;
    let sigma_t = scn.strain_pulse_m / v;
    let noise = Normal::new(0.0, scn.noise_sigma(scn.strain_amplitude)).unwrap();
    // second girder carries a smaller share of the load
    let pair_gain = [1.0, 0.8];
    let axle_gain = [1.0, 1.0 + 0.5 * rng.random::<f64>()];
    core::array::from_fn(|c| {
        let (pair, downstream) = (c / 2, c % 2);
        let t_sensor = t_first + downstream as f64 * scn.sensor_spacing_m / v;
        let values = (0..n)
            .map(|i| {
                let t = start + i as f64 / fs;
                let mut s = 0.0;
                for (k, g) in axle_gain.iter().enumerate() {
                    let d = (t - t_sensor - k as f64 * scn.axle_spacing_m / v) / sigma_t;
                    s += g * libm::exp(-0.5 * d * d);
                }
                scn.strain_amplitude * pair_gain[pair] * s + noise.sample(rng)
            })
            .collect();
        TimeSeries { quantity: Quantity::Strain, start_time: start, sample_rate: fs, values }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthEvent {
    pub accel: TimeSeries,
    pub strains: [TimeSeries; 4],
    pub truth: SpeedLabel,
}

/// One labeled passage; the same scenario and seed give bit-identical output.
pub fn synth_event(scn: &TrafficScenario) -> Result<SynthEvent> {
    scn.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scn.rng_seed);
    let vehicle = Vehicle::draw(scn, scn.arrival_s, scn.speed_kmh, &mut rng);
    let n = libm::round(scn.duration_s * scn.sample_rate) as usize;
    let mut accel = vec![0.0; n];
    vehicle.render(scn, 0, &mut accel);
    let noise = Normal::new(0.0, scn.noise_sigma(scn.accel_amplitude)).unwrap();
    for a in accel.iter_mut() {
        *a += noise.sample(&mut rng);
    }
    let strains = render_strains(scn, &vehicle, &mut rng);
    Ok(SynthEvent {
        accel: TimeSeries { quantity: Quantity::Acceleration, start_time: 0.0, sample_rate: scn.sample_rate, values: accel },
        strains,
        truth: label_speed(scn.speed_kmh),
    })
}

/// Relative margin kept from class boundaries when drawing speeds.
pub const CLASS_INSET: f64 = 0.01;

/// Uniform speed strictly inside a class interval.
pub fn draw_speed(class: SpeedClass, rng: &mut impl Rng) -> Result<f64> {
    let (lo, hi) = class.interval().ok_or_else(|| invalid("class", "excluded class has no interval"))?;
    Ok(rng.random_range(lo * (1.0 + CLASS_INSET)..hi / (1.0 + CLASS_INSET)))
}

/// Independent seed for item `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng.random()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventPlan {
    pub index: usize,
    pub class: SpeedClass,
    pub speed_kmh: f64,
    pub seed: u64,
}

/// Default class mix `[C30, C40, C50]`.
pub const DEFAULT_MIX: [usize; 3] = [649, 490, 126];

/// Classes shuffled and speeds drawn for a dataset of the given mix.
pub fn plan_dataset(mix: [usize; 3], seed: u64) -> Result<Vec<EventPlan>> {
    if mix.iter().any(|c| *c == 0) {
        return Err(invalid("mix", "every class needs at least one event"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes: Vec<SpeedClass> = SpeedClass::LABELED
        .iter()
        .zip(mix)
        .flat_map(|(c, n)| core::iter::repeat(*c).take(n))
        .collect();
    classes.shuffle(&mut rng);
    classes
        .into_iter()
        .enumerate()
        .map(|(index, class)| {
            Ok(EventPlan { index, class, speed_kmh: draw_speed(class, &mut rng)?, seed: derive_seed(seed, index as u64) })
        })
        .collect()
}

impl EventPlan {
    pub fn scenario(&self, template: &TrafficScenario) -> TrafficScenario {
        TrafficScenario { speed_kmh: self.speed_kmh, rng_seed: self.seed, ..template.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamSpec {
    pub duration_s: f64,
    pub vehicles_per_hour: f64,
    /// Relative class frequencies `[C30, C40, C50]` for vehicle speeds.
    pub mix: [f64; 3],
    pub seed: u64,
}

impl Default for StreamSpec {
    fn default() -> Self {
        Self { duration_s: 12.0 * 3600.0, vehicles_per_hour: 120.0, mix: [649.0, 490.0, 126.0], seed: 0 }
    }
}

/// Continuous acceleration record with Poisson vehicle arrivals, produced
/// in chunks so long windows never need to be held in memory.
pub struct TrafficStream {
    scn: TrafficScenario,
    vehicles: Vec<Vehicle>,
    max_extent: f64,
    noise_rng: ChaCha8Rng,
    noise: Normal<f64>,
    position: usize,
    total: usize,
}

impl TrafficStream {
    pub fn new(template: &TrafficScenario, spec: &StreamSpec) -> Result<Self> {
        template.validate()?;
        if !(spec.duration_s > 0.0) || !(spec.vehicles_per_hour > 0.0) {
            return Err(invalid("stream", "duration and traffic rate must be positive"));
        }
        let weight_sum: f64 = spec.mix.iter().sum();
        if spec.mix.iter().any(|w| *w < 0.0) || !(weight_sum > 0.0) {
            return Err(invalid("mix", "class weights must be non-negative with a positive sum"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let gaps = Exp::new(spec.vehicles_per_hour / 3600.0).unwrap();
        let mut vehicles = Vec::new();
        let mut t = gaps.sample(&mut rng);
        while t < spec.duration_s {
            let pick = rng.random::<f64>() * weight_sum;
            let mut acc = 0.0;
            let mut class = SpeedClass::LABELED[2];
            for (c, w) in SpeedClass::LABELED.iter().zip(spec.mix) {
                acc += w;
                if pick < acc {
                    class = *c;
                    break;
                }
            }
            let speed = draw_speed(class, &mut rng)?;
            vehicles.push(Vehicle::draw(template, t, speed, &mut rng));
            t += gaps.sample(&mut rng);
        }
        let max_extent = vehicles.iter().map(|v| v.extent(template)).fold(0.0, f64::max);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        noise_rng.set_stream(u64::MAX);
        Ok(Self {
            noise: Normal::new(0.0, template.noise_sigma(template.accel_amplitude)).unwrap(),
            scn: template.clone(),
            vehicles,
            max_extent,
            noise_rng,
            position: 0,
            total: libm::round(spec.duration_s * template.sample_rate) as usize,
        })
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn sample_rate(&self) -> f64 {
        self.scn.sample_rate
    }

    pub fn total_samples(&self) -> usize {
        self.total
    }

    /// Fill `out` with up to `max_len` further samples; returns how many were written.
    pub fn next_chunk(&mut self, out: &mut Vec<f64>, max_len: usize) -> usize {
        out.clear();
        let len = max_len.min(self.total - self.position);
        if len == 0 {
            return 0;
        }
        out.resize(len, 0.0);
        let fs = self.scn.sample_rate;
        let t0 = self.position as f64 / fs;
        let t1 = (self.position + len) as f64 / fs;
        let first = self.vehicles.partition_point(|v| v.arrival_s < t0 - self.max_extent);
        for v in &self.vehicles[first..] {
            if v.arrival_s >= t1 {
                break;
            }
            v.render(&self.scn, self.position, out);
        }
        for o in out.iter_mut() {
            *o += self.noise.sample(&mut self.noise_rng);
        }
        self.position += len;
        len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_event() {
        let scn = TrafficScenario { rng_seed: 42, ..TrafficScenario::default() };
        assert_eq!(synth_event(&scn).unwrap(), synth_event(&scn).unwrap());
        let other = TrafficScenario { rng_seed: 43, ..scn.clone() };
        assert_ne!(synth_event(&scn).unwrap().accel, synth_event(&other).unwrap().accel);
    }

    #[test]
    fn plan_counts_and_seed_sensitivity() {
        let plan = plan_dataset([10, 10, 10], 1).unwrap();
        assert_eq!(plan.len(), 30);
        for c in SpeedClass::LABELED {
            assert_eq!(plan.iter().filter(|p| p.class == c).count(), 10);
        }
        for p in &plan {
            assert_eq!(label_speed(p.speed_kmh).class, p.class);
        }
        let other = plan_dataset([10, 10, 10], 2).unwrap();
        assert!(plan.iter().zip(&other).take(10).all(|(a, b)| a.speed_kmh != b.speed_kmh));
        assert_eq!(plan_dataset(DEFAULT_MIX, 7).unwrap().len(), 1265);
        assert!(plan_dataset([0, 1, 1], 7).is_err());
    }

    #[test]
    fn stream_is_chunk_invariant() {
        let scn = TrafficScenario::default();
        let spec = StreamSpec { duration_s: 120.0, vehicles_per_hour: 600.0, ..StreamSpec::default() };
        let mut whole = TrafficStream::new(&scn, &spec).unwrap();
        let mut all = Vec::new();
        whole.next_chunk(&mut all, usize::MAX);
        let mut chunked = TrafficStream::new(&scn, &spec).unwrap();
        let mut joined = Vec::new();
        let mut buf = Vec::new();
        while chunked.next_chunk(&mut buf, 7001) > 0 {
            joined.extend_from_slice(&buf);
        }
        assert_eq!(all.len(), 72000);
        assert_eq!(all, joined);
        assert!(!whole.vehicles().is_empty());
    }

    #[test]
    fn tilt_favours_high_modes_when_fast() {
        let scn = TrafficScenario::default();
        let slow = scn.weights_at(32.0);
        let fast = scn.weights_at(58.0);
        assert!(fast[4] / fast[0] > slow[4] / slow[0]);
        assert_eq!(scn.dominant_freq_hz(), 21.0);
    }
}
