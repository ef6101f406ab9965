use std::f64::consts::PI;

use peh_core::num_complex::Complex64;
use peh_core::{
    build_model, frf_voltage, simulate_voltage, DeviceConfig, Integrator, Material, ModeCount, Quantity, ReducedModel,
    SolverOpts, TimeSeries,
};

fn sine(f: f64, fs: f64, n: usize) -> TimeSeries {
    let v = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
    TimeSeries::new(Quantity::Acceleration, 0.0, fs, v).unwrap()
}

fn settle_time(m: &ReducedModel) -> f64 {
    (10.0 / (m.damping_ratio(0) * m.natural_freqs_rad[0])).max(10.0 * m.capacitance * m.load_resistance)
}

fn amplitude(v: &[f64], fs: f64, f: f64) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (i, x) in v.iter().enumerate() {
        let ph = 2.0 * PI * f * i as f64 / fs;
        s += x * ph.sin();
        c += x * ph.cos();
    }
    2.0 * s.hypot(c) / v.len() as f64
}

#[test]
fn single_mode_matches_scalar_closed_form() {
    let m = build_model(&DeviceConfig { num_modes: ModeCount::Fixed(1), ..DeviceConfig::standard(0.15) }).unwrap();
    let (k, c, th, tp, f) = (m.k_o[(0, 0)], m.c_o[(0, 0)], m.theta_o[0], m.theta_phi[0], m.f_o[0]);
    let freqs: Vec<f64> = (1..=100).map(|i| i as f64 * 2.0).collect();
    let curve = frf_voltage(&m, &freqs).unwrap();
    let i = Complex64::i();
    for (hz, h) in freqs.iter().zip(&curve.response) {
        let w = 2.0 * PI * hz;
        let chi = 1.0 / (1.0 / m.load_resistance + i * w * m.capacitance);
        let closed = i * w * chi * tp * f / (-w * w + i * w * c + k + i * w * chi * th * tp);
        assert!((h - closed).norm() < 1e-12 * closed.norm(), "{hz} Hz");
    }
}

#[test]
fn steady_state_amplitude_follows_frf() {
    let m = build_model(&DeviceConfig::standard(0.15)).unwrap();
    let f1 = m.natural_freqs_hz()[0];
    for method in [Integrator::DormandPrince, Integrator::ExactHold] {
        for f in [0.5 * f1, f1, 2.0 * f1] {
            let fs = 100.0 * f;
            let skip = (settle_time(&m) * fs).ceil() as usize;
            let v = simulate_voltage(&m, &sine(f, fs, skip + 2000), &SolverOpts { method, ..SolverOpts::default() }).unwrap();
            let got = amplitude(&v.values[skip..], fs, f);
            let want = frf_voltage(&m, &[f]).unwrap().magnitude()[0];
            assert!((got / want - 1.0).abs() < 0.01, "{method:?} {f} Hz: {got} vs {want}");
        }
    }
}

#[test]
fn halving_tolerances_barely_moves_final_voltage() {
    let m = build_model(&DeviceConfig::standard(0.15)).unwrap();
    let f = m.natural_freqs_hz()[0];
    let fs = 100.0 * f;
    let a = sine(f, fs, (settle_time(&m) * fs) as usize + 2000);
    let coarse = simulate_voltage(&m, &a, &SolverOpts::default()).unwrap();
    let fine = simulate_voltage(&m, &a, &SolverOpts { rtol: 5e-7, atol: 5e-10, ..SolverOpts::default() }).unwrap();
    let peak = coarse.values.iter().fold(0.0f64, |p, v| p.max(v.abs()));
    let (x, y) = (coarse.values.last().unwrap(), fine.values.last().unwrap());
    assert!((x - y).abs() < 1e-3 * peak, "{x} vs {y}");
}

#[test]
fn response_is_linear_in_input() {
    let m = build_model(&DeviceConfig::standard(0.20)).unwrap();
    let a = sine(13.0, 600.0, 3000);
    let doubled = a.map(Quantity::Acceleration, |x| 2.0 * x);
    let opts = SolverOpts::default();
    let (v1, v2) = (simulate_voltage(&m, &a, &opts).unwrap(), simulate_voltage(&m, &doubled, &opts).unwrap());
    let peak = v1.values.iter().fold(0.0f64, |p, v| p.max(v.abs()));
    for (x, y) in v1.values.iter().zip(&v2.values) {
        assert!((2.0 * x - y).abs() < 1e-4 * peak);
    }
}

#[test]
fn uncoupled_open_circuit_stays_at_zero() {
    let piezo = Material { e31: 0.0, ..Material::pzt5a() };
    let cfg = DeviceConfig { piezo, load_resistance: 1e12, ..DeviceConfig::standard(0.15) };
    let m = build_model(&cfg).unwrap();
    let v = simulate_voltage(&m, &sine(21.0, 600.0, 1200), &SolverOpts::default()).unwrap();
    assert!(v.values.iter().all(|x| *x == 0.0));
}
