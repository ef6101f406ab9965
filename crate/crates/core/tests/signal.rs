use std::f64::consts::PI;

use peh_core::fft::{forward_real, Fft, Radix2};
use peh_core::signal::{cwt_morlet, default_freqs, detect_events, estimate_speed, estimate_speed_pairs, DetectOpts, SpeedOpts};
use peh_core::synth::{synth_event, TrafficScenario};
use peh_core::{Quantity, TimeSeries};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn tone_ridges_land_on_their_bins() {
    let freqs = default_freqs();
    for f in [10.0, 25.0, 50.0, 100.0, 150.0, 200.0] {
        let x = (0..3000).map(|i| (2.0 * PI * f * i as f64 / 600.0).sin()).collect();
        let ts = TimeSeries::new(Quantity::Acceleration, 0.0, 600.0, x).unwrap();
        let sc = cwt_morlet(&Radix2, &ts, &freqs, 6.0).unwrap();
        for ti in (1000..2000).step_by(100) {
            assert!((sc.ridge_hz(ti) - f).abs() <= 1.0, "{f} Hz -> {}", sc.ridge_hz(ti));
        }
    }
}

/// One hour of white noise with 40 noise-free passages planted 85 s apart.
#[test]
fn planted_events_are_all_found() {
    let fs = 600.0;
    let n = (3600.0 * fs) as usize;
    let quiet = TrafficScenario { noise_snr_db: 300.0, ..TrafficScenario::default() };
    let sigma = quiet.accel_amplitude / 2f64.sqrt() / 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut trace: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    let mut arrivals = Vec::new();
    for k in 0..40 {
        let offset = 60.0 + 85.0 * k as f64;
        let speed = 32.0 + 0.6 * k as f64;
        let ev = synth_event(&TrafficScenario { speed_kmh: speed, rng_seed: k, ..quiet.clone() }).unwrap();
        let first = (offset * fs) as usize;
        for (i, a) in ev.accel.values.iter().enumerate() {
            trace[first + i] += a;
        }
        arrivals.push(offset + quiet.arrival_s);
    }
    let ts = TimeSeries::new(Quantity::Acceleration, 0.0, fs, trace).unwrap();
    let windows = detect_events(&ts, &DetectOpts::default()).unwrap();
    assert_eq!(windows.len(), 40);
    for (w, t) in windows.iter().zip(&arrivals) {
        assert!(w.peak_time >= *t && w.peak_time < t + 10.0, "peak {} for arrival {t}", w.peak_time);
        assert_eq!(w.accel.len(), 15000);
    }
}

#[test]
fn axle_pulse_trains_give_speed() {
    let scn = TrafficScenario { speed_kmh: 35.0, rng_seed: 3, ..TrafficScenario::default() };
    let ev = synth_event(&scn).unwrap();
    let s = &ev.strains;
    let single = estimate_speed(&Radix2, &s[0], &s[1], scn.sensor_spacing_m, &SpeedOpts::default()).unwrap();
    assert!((single / 35.0 - 1.0).abs() < 0.01, "{single}");
    let pair = estimate_speed_pairs(&Radix2, &[(&s[0], &s[1]), (&s[2], &s[3])], 9.0, &SpeedOpts::default()).unwrap();
    assert!(!pair.flagged);
    assert!((pair.speed_kmh / 35.0 - 1.0).abs() < 0.01);
}

#[test]
fn generated_acceleration_peaks_near_21_hz() {
    let fs = 600.0;
    let len = 32768;
    let mut power = vec![0.0; len / 2];
    for seed in 0..20 {
        let ev = synth_event(&TrafficScenario { rng_seed: seed, speed_kmh: 34.0 + seed as f64, ..TrafficScenario::default() })
            .unwrap();
        let spec = forward_real(&Radix2, &ev.accel.values, Radix2.fast_len(len));
        for (p, c) in power.iter_mut().zip(&spec) {
            *p += c.norm_sqr();
        }
    }
    let df = fs / len as f64;
    let (lo, hi) = ((20.0 / df) as usize, (22.0 / df) as usize);
    let best = (lo..=hi).max_by(|a, b| power[*a].total_cmp(&power[*b])).unwrap();
    assert!(best > lo && best < hi, "maximum at the band edge, {} Hz", best as f64 * df);
    assert!(power[best] > power[lo] && power[best] > power[hi]);
}
