//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use peh::fft::RustFft;
use peh::sweep::{run_sweep, SweepConfig};
use peh_core::classify::loss_and_grad;
use peh_core::num_complex::Complex64;
use peh_core::signal::{cwt_complex, cwt_morlet, default_freqs, estimate_speed_pairs, label_speed, SpeedClass, SpeedOpts};
use peh_core::synth::{plan_dataset, synth_event, TrafficScenario};
use peh_core::{
    build_model, frf_voltage, harvested_energy, simulate_voltage, DeviceConfig, ModeCount, Quantity,
    SolverOpts, TimeSeries,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LENGTHS: [f64; 6] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn single_mode_frf() -> Outcome {
    let start = Instant::now();
    let cfg = DeviceConfig { num_modes: ModeCount::Fixed(1), ..DeviceConfig::standard(0.15) };
    let m = build_model(&cfg).map_err(|e| e.to_string())?;
    let (k, c, th, tp, f) = (m.k_o[(0, 0)], m.c_o[(0, 0)], m.theta_o[0], m.theta_phi[0], m.f_o[0]);
    let freqs: Vec<f64> = (1..=100).map(|i| i as f64 * 2.0).collect();
    let curve = frf_voltage(&m, &freqs).map_err(|e| e.to_string())?;
    let i = Complex64::i();
    let worst = freqs.iter().zip(&curve.response).fold(0.0f64, |acc, (hz, h)| {
        let w = 2.0 * PI * hz;
        let chi = 1.0 / (1.0 / m.load_resistance + i * w * m.capacitance);
        let closed = i * w * chi * tp * f / (-w * w + i * w * c + k + i * w * chi * th * tp);
        acc.max((h - closed).norm() / closed.norm())
    });
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-12 && secs < 1.0, format!("max relative error {worst:.2e} over 100 frequencies, {secs:.2} s"))
}

fn resonance_anchor() -> Outcome {
    let start = Instant::now();
    let cfg = DeviceConfig::standard(0.15);
    let m = build_model(&cfg).map_err(|e| e.to_string())?;
    let f1 = m.natural_freqs_hz()[0];
    let beam = peh_core::beam_oracle_f1(&cfg);
    let secs = start.elapsed().as_secs_f64();
    check((18.0..=24.0).contains(&f1) && secs < 10.0, format!("f1 = {f1:.3} Hz (beam oracle {beam:.3} Hz), {secs:.2} s"))
}

fn scaling_law() -> Outcome {
    let mut products = Vec::new();
    let mut counts = Vec::new();
    for l in LENGTHS {
        let m = build_model(&DeviceConfig::standard(l)).map_err(|e| e.to_string())?;
        let f = m.natural_freqs_hz();
        products.push(f[0] * l * l);
        counts.push(f.iter().filter(|v| **v < 200.0).count());
    }
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    let spread = products.iter().map(|p| (p / mean - 1.0).abs()).fold(0.0, f64::max);
    let monotone = counts.windows(2).all(|w| w[0] <= w[1]);
    check(spread < 0.10 && monotone, format!("f1*L^2 max deviation {:.2}%, modes below 200 Hz {counts:?}", spread * 100.0))
}

/// Least-squares amplitude of the `f`-Hz component over whole periods.
fn tone_amplitude(v: &[f64], fs: f64, f: f64) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (i, x) in v.iter().enumerate() {
        let ph = 2.0 * PI * f * i as f64 / fs;
        s += x * ph.sin();
        c += x * ph.cos();
    }
    2.0 * (s * s + c * c).sqrt() / v.len() as f64
}

fn frf_transient() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for l in LENGTHS {
        let m = build_model(&DeviceConfig::standard(l)).map_err(|e| e.to_string())?;
        let f1 = m.natural_freqs_hz()[0];
        let settle = (10.0 / (m.damping_ratio(0) * m.natural_freqs_rad[0])).max(10.0 * m.capacitance * m.load_resistance);
        for f in [0.5 * f1, f1, 2.0 * f1] {
            let fs = 100.0 * f;
            let periods = 20.0;
            let skip = (settle * fs).ceil() as usize;
            let n = skip + (periods * 100.0) as usize;
            let a: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
            let accel = TimeSeries::new(Quantity::Acceleration, 0.0, fs, a).map_err(|e| e.to_string())?;
            let v = simulate_voltage(&m, &accel, &SolverOpts::default()).map_err(|e| e.to_string())?;
            let amp = tone_amplitude(&v.values[skip..], fs, f);
            let expect = frf_voltage(&m, &[f]).map_err(|e| e.to_string())?.magnitude()[0];
            worst = worst.max((amp / expect - 1.0).abs());
            checks += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        checks == 18 && worst < 0.01 && secs < 120.0,
        format!("{checks} checks, worst amplitude error {:.3}%, {secs:.1} s", worst * 100.0),
    )
}

fn energy() -> Outcome {
    let fs = 600.0;
    let ones = TimeSeries::new(Quantity::Voltage, 0.0, fs, vec![1.0; 6001]).unwrap();
    let e_const = harvested_energy(&ones, 100.0, 0.0, 10.0).map_err(|e| e.to_string())?;
    let (v0, f, r) = (2.0, 7.0, 100.0);
    let periods = 21.0;
    let t = periods / f;
    let n = (t * fs).round() as usize + 1;
    let v: Vec<f64> = (0..n).map(|i| v0 * (2.0 * PI * f * i as f64 / fs).sin()).collect();
    let sine = TimeSeries::new(Quantity::Voltage, 0.0, fs, v).unwrap();
    let e_sin = harvested_energy(&sine, r, 0.0, sine.end_time()).map_err(|e| e.to_string())?;
    let exact = v0 * v0 * sine.end_time() / (2.0 * r);
    let rel = (e_sin / exact - 1.0).abs();
    check(
        (e_const - 0.1).abs() < 1e-12 && rel < 0.005,
        format!("constant {e_const:.15} J, sinusoid error {:.4}%", rel * 100.0),
    )
}

fn speed_pipeline() -> Outcome {
    let fft = RustFft::new();
    let template = TrafficScenario { noise_snr_db: 20.0, ..TrafficScenario::default() };
    let mut scenarios: Vec<TrafficScenario> =
        plan_dataset([70, 70, 60], 11).map_err(|e| e.to_string())?.iter().map(|p| p.scenario(&template)).collect();
    let gaps = [39.5, 40.0, 41.0, 49.0, 25.0, 64.0, 70.0, 28.0];
    for (i, s) in gaps.iter().enumerate() {
        scenarios.push(TrafficScenario { speed_kmh: *s, rng_seed: 9000 + i as u64, ..template.clone() });
    }
    let (mut worst, mut wrong, mut gap_ok) = (0.0f64, 0usize, 0usize);
    for scn in &scenarios {
        let ev = synth_event(scn).map_err(|e| e.to_string())?;
        let s = &ev.strains;
        let est = estimate_speed_pairs(&fft, &[(&s[0], &s[1]), (&s[2], &s[3])], scn.sensor_spacing_m, &SpeedOpts::default())
            .map_err(|e| e.to_string())?;
        worst = worst.max((est.speed_kmh / scn.speed_kmh - 1.0).abs());
        if est.label.class != ev.truth.class {
            wrong += 1;
        }
        if ev.truth.class == SpeedClass::Excluded && est.label.class == SpeedClass::Excluded {
            gap_ok += 1;
        }
    }
    let labeled = scenarios.len() - gaps.len();
    check(
        worst < 0.01 && wrong == 0 && gap_ok == gaps.len() && label_speed(49.0).class == SpeedClass::Excluded,
        format!(
            "{labeled} labeled + {} gap events, worst speed error {:.3}%, {wrong} label mismatches, {gap_ok} gap events excluded",
            gaps.len(),
            worst * 100.0
        ),
    )
}

fn cwt() -> Outcome {
    let fft = RustFft::new();
    let fs = 600.0;
    let freqs = default_freqs();
    let bin = |hz: f64| freqs.iter().enumerate().min_by(|a, b| (a.1 - hz).abs().total_cmp(&(b.1 - hz).abs())).unwrap().0;
    let mut tone_err = 0usize;
    for f in [10.0, 25.0, 50.0, 100.0, 150.0, 200.0] {
        let x: Vec<f64> = (0..6000).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        let ts = TimeSeries::new(Quantity::Acceleration, 0.0, fs, x).unwrap();
        let sc = cwt_morlet(&fft, &ts, &freqs, 6.0).map_err(|e| e.to_string())?;
        for ti in (sc.n_times() / 4..3 * sc.n_times() / 4).step_by(50) {
            tone_err = tone_err.max(bin(sc.ridge_hz(ti)).abs_diff(bin(f)));
        }
    }
    let dur = 20.0;
    let (f0, f1) = (10.0, 150.0);
    let k = (f1 - f0) / dur;
    let n = (dur * fs) as usize;
    let x: Vec<f64> = (0..n).map(|i| {
        let t = i as f64 / fs;
        (2.0 * PI * (f0 * t + 0.5 * k * t * t)).sin()
    }).collect();
    let ts = TimeSeries::new(Quantity::Acceleration, 0.0, fs, x).unwrap();
    let sc = cwt_morlet(&fft, &ts, &freqs, 6.0).map_err(|e| e.to_string())?;
    let mut chirp_err = 0usize;
    for ti in ((2.0 * fs) as usize..n - (2.0 * fs) as usize).step_by(60) {
        let inst = f0 + k * sc.times_s[ti];
        chirp_err = chirp_err.max(bin(sc.ridge_hz(ti)).abs_diff(bin(inst)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<f64> = (0..3000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..3000).map(|i| (0.3 * i as f64).sin()).collect();
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let series = |v: Vec<f64>| TimeSeries::new(Quantity::Acceleration, 0.0, fs, v).unwrap();
    let ca = cwt_complex(&fft, &series(a), &freqs, 6.0).map_err(|e| e.to_string())?;
    let cb = cwt_complex(&fft, &series(b), &freqs, 6.0).map_err(|e| e.to_string())?;
    let cab = cwt_complex(&fft, &series(ab), &freqs, 6.0).map_err(|e| e.to_string())?;
    let lin = cab
        .coeffs
        .iter()
        .flatten()
        .zip(ca.coeffs.iter().flatten().zip(cb.coeffs.iter().flatten()))
        .map(|(s, (x, y))| (s - x - y).norm())
        .fold(0.0, f64::max);
    check(
        tone_err <= 1 && chirp_err <= 2 && lin < 1e-10,
        format!("tone ridge error {tone_err} bin(s), chirp ridge error {chirp_err} bin(s), linearity residual {lin:.1e}"),
    )
}

fn sweep() -> Outcome {
    let start = Instant::now();
    let cfg = SweepConfig::default();
    let fft = RustFft::new();
    let report = run_sweep(&cfg, &fft, None).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let again = run_sweep(&cfg, &fft, None).map_err(|e| e.to_string())?;
    let deterministic = serde_json::to_string(&report).unwrap() == serde_json::to_string(&again).unwrap();
    let acc: Vec<f64> = report.devices.iter().filter_map(|d| d.accuracy_mean).collect();
    let energy: Vec<f64> = report.devices.iter().filter_map(|d| d.energy_mean_j).collect();
    let distinct = |v: &[f64]| v.iter().any(|x| *x != v[0]);
    let mean_acc = acc.iter().sum::<f64>() / acc.len().max(1) as f64;
    let min_acc = acc.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = report.devices.len() == 6
        && !report.any_failed
        && deterministic
        && acc.len() == 6
        && energy.len() == 6
        && min_acc >= 0.85
        && min_acc >= report.majority_baseline
        && distinct(&acc)
        && distinct(&energy)
        && report.energy_optimum_matches_excitation == Some(true)
        && elapsed < Duration::from_secs(15 * 60);
    let cm = |v: Option<f64>| v.map_or("-".into(), |x| format!("{:.0} cm", x * 100.0));
    check(
        ok,
        format!(
            "{} devices, {} events, accuracy min {min_acc:.3} mean {mean_acc:.3} vs majority {:.3}, energy optimum {}, nearest f1 {}, deterministic {deterministic}, {:.0} s per sweep",
            report.devices.len(),
            report.events_used,
            report.majority_baseline,
            cm(report.energy_argmax_length_m),
            cm(report.nearest_f1_length_m),
            elapsed.as_secs_f64()
        ),
    )
}

fn gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (n, d, k) = (12, 4, 3);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let w: Vec<Vec<f64>> = (0..k).map(|_| (0..=d).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
        let l2 = 0.1;
        let (_, g) = loss_and_grad(&w, &x, &y, l2);
        let h = 1e-5;
        for c in 0..k {
            for j in 0..=d {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[c][j] += h;
                wm[c][j] -= h;
                let fd = (loss_and_grad(&wp, &x, &y, l2).0 - loss_and_grad(&wm, &x, &y, l2).0) / (2.0 * h);
                worst = worst.max((fd - g[c][j]).abs() / g[c][j].abs().max(1e-3));
            }
        }
    }
    check(worst < 1e-6, format!("max relative gradient error {worst:.2e}"))
}

fn main() {
    peh::init_workers();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("single-mode FRF oracle", single_mode_frf),
        ("resonance anchor", resonance_anchor),
        ("scaling law", scaling_law),
        ("FRF-transient equivalence", frf_transient),
        ("energy", energy),
        ("speed pipeline", speed_pipeline),
        ("CWT", cwt),
        ("end-to-end sweep", sweep),
        ("gradient check", gradient),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
