use std::process::Command;

use peh::fft::RustFft;
use peh::pipeline::{device_signal, event_scalogram, scalogram_features, window_start, FeatureOpts};
use peh::report::DeviceStatus;
use peh::sweep::{run_sweep, DatasetSource, EnergySpec, EnergyWindow, SweepConfig};
use peh_core::classify::{evaluate, Protocol, TrainOpts};
use peh_core::synth::{plan_dataset, synth_event, StreamSpec, TrafficScenario, TrafficStream};
use peh_core::{build_model, harvested_energy, DeviceConfig, Quantity, TimeSeries};

fn small_config(mix: [usize; 3], lengths: Vec<f64>) -> SweepConfig {
    SweepConfig {
        lengths,
        dataset: DatasetSource::Synthetic { mix, seed: 3, scenario: TrafficScenario::default() },
        energy: EnergySpec {
            windows: vec![EnergyWindow { start_s: 0.0, end_s: 600.0, seed: 5 }],
            ..EnergySpec::default()
        },
        ..SweepConfig::default()
    }
}

fn raw_features(mix: [usize; 3], scenario: &TrafficScenario) -> (Vec<Vec<f64>>, Vec<usize>) {
    let fft = RustFft::new();
    let opts = FeatureOpts::default();
    plan_dataset(mix, 3)
        .unwrap()
        .iter()
        .filter_map(|p| {
            let ev = synth_event(&p.scenario(scenario)).unwrap();
            let start = window_start(&ev.accel, &opts).unwrap()?;
            let sc = event_scalogram(&fft, None, &ev.accel, start, &opts).unwrap();
            Some((scalogram_features(&sc, &opts).unwrap(), p.class.index().unwrap()))
        })
        .unzip()
}

#[test]
fn single_length_sweep_matches_individual_modules() {
    let cfg = small_config([10, 10, 10], vec![0.15]);
    let report = run_sweep(&cfg, &RustFft::new(), None).unwrap();
    assert_eq!(report.devices.len(), 1);
    let dev = &report.devices[0];
    let model = build_model(&DeviceConfig::standard(0.15)).unwrap();
    assert_eq!(dev.natural_freqs_hz, model.natural_freqs_hz());

    let fft = RustFft::new();
    let opts = FeatureOpts::default();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for p in plan_dataset([10, 10, 10], 3).unwrap() {
        let ev = synth_event(&p.scenario(&TrafficScenario::default())).unwrap();
        let start = window_start(&ev.accel, &opts).unwrap().unwrap();
        let sc = event_scalogram(&fft, Some(&model), &ev.accel, start, &opts).unwrap();
        x.push(scalogram_features(&sc, &opts).unwrap());
        y.push(p.class.index().unwrap());
    }
    let metrics = evaluate(&TrainOpts::default(), &x, &y, &Protocol::default()).unwrap();
    assert_eq!(dev.metrics.as_ref().unwrap(), &metrics);

    let spec = StreamSpec { duration_s: 600.0, seed: 5, ..StreamSpec::default() };
    let mut stream = TrafficStream::new(&TrafficScenario::default(), &spec).unwrap();
    let mut accel = Vec::new();
    let mut chunk = Vec::new();
    while stream.next_chunk(&mut chunk, 7919) > 0 {
        accel.extend_from_slice(&chunk);
    }
    let accel = TimeSeries::new(Quantity::Acceleration, 0.0, stream.sample_rate(), accel).unwrap();
    let v = device_signal(Some(&model), &accel).unwrap();
    let e = harvested_energy(&v, model.load_resistance, 0.0, v.end_time()).unwrap();
    let got = dev.energy_j[0];
    assert!((got / e - 1.0).abs() < 1e-9, "{got} vs {e}");
}

#[test]
fn sweep_is_deterministic_and_records_failures() {
    let cfg = small_config([8, 8, 8], vec![0.10, 0.20]);
    let a = run_sweep(&cfg, &RustFft::new(), None).unwrap();
    let b = run_sweep(&cfg, &RustFft::new(), None).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let mut broken = cfg.clone();
    broken.base.control_net = (4, 8);
    let r = run_sweep(&broken, &RustFft::new(), None).unwrap();
    assert!(r.any_failed);
    assert!(r.devices.iter().all(|d| matches!(d.status, DeviceStatus::Failed { .. }) && d.energy_mean_j.is_none()));
}

fn knob_accuracy(scn: TrafficScenario) -> f64 {
    let (x, y) = raw_features([40, 40, 40], &scn);
    assert_eq!(x.len(), 120);
    evaluate(&TrainOpts::default(), &x, &y, &Protocol::default()).unwrap().accuracy_mean
}

#[test]
fn cleaner_signals_classify_better() {
    let acc: Vec<f64> = [10.0, 20.0, 40.0]
        .into_iter()
        .map(|snr| knob_accuracy(TrafficScenario { noise_snr_db: snr, ..TrafficScenario::default() }))
        .collect();
    assert!(acc.windows(2).all(|w| w[0] < w[1]), "{acc:?}");
}

#[test]
fn stronger_speed_tilt_classifies_better() {
    let acc: Vec<f64> = [0.0, 0.2, 0.4]
        .into_iter()
        .map(|tilt| knob_accuracy(TrafficScenario { speed_tilt: tilt, ..TrafficScenario::default() }))
        .collect();
    assert!(acc.windows(2).all(|w| w[0] < w[1]), "{acc:?}");
}

#[test]
fn command_line_round_trip() {
    let exe = env!("CARGO_BIN_EXE_peh");
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = |args: &[&str]| {
        let out = Command::new(exe).args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    run(&["synth", "--mix", "4,4,4", "--seed", "2", "--out", data.to_str().unwrap()]);
    let model = dir.path().join("model.json");
    let listing = run(&["model", "--length", "0.15", "--out", model.to_str().unwrap()]);
    assert!(listing.contains("mode 1: 20."), "{listing}");
    let accel = data.join("events/e00000_accel.csv");
    let volts = dir.path().join("v.csv");
    run(&["simulate", "--model", model.to_str().unwrap(), "--accel", accel.to_str().unwrap(), "--out", volts.to_str().unwrap()]);
    let joules: f64 = run(&["energy", "--volts", volts.to_str().unwrap(), "--rl", "100"]).trim().parse().unwrap();
    assert!(joules > 0.0);
    assert_eq!(run(&["events", "--accel", accel.to_str().unwrap()]).lines().count(), 1);
    let strains: Vec<String> =
        ["1a", "1b", "2a", "2b"].iter().map(|s| data.join(format!("events/e00000_strain_{s}.csv")).display().to_string()).collect();
    let mut args = vec!["speed", "--strains"];
    args.extend(strains.iter().map(String::as_str));
    assert!(run(&args).contains("km/h"));
    let png = dir.path().join("s.png");
    run(&["cwt", "--accel", accel.to_str().unwrap(), "--png", png.to_str().unwrap()]);
    assert!(png.metadata().unwrap().len() > 0);
    let manifest = data.join("manifest.jsonl");
    run(&["eval-baseline", "--manifest", manifest.to_str().unwrap(), "--runs", "2"]);

    let cfg = dir.path().join("sweep.json");
    std::fs::write(&cfg, r#"{"lengths":[0.15],"base":{"geometry":{"length_m":0.15,"width_m":0.05,"piezo_thickness_m":0.00025,"substrate_thickness_m":0.0005},"piezo":{"density":7750,"youngs_modulus":61e9,"poisson_ratio":0.35,"e31":-10.4,"eps33_s":1.33e-8},"substrate":{"density":8800,"youngs_modulus":105e9,"poisson_ratio":0.34},"load_resistance":100,"rayleigh_alpha":14.65,"rayleigh_beta":1e-5,"control_net":[4,8]},"energy":{"windows":[{"start_s":0,"end_s":60}]}}"#).unwrap();
    let out = Command::new(exe)
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--manifest", manifest.to_str().unwrap()])
        .args(["--out", dir.path().join("sweep").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("sweep/report.json").exists());
}

#[cfg(unix)]
#[test]
fn external_classifier_receives_tensors_and_manifest() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("fake-cnn");
    std::fs::write(
        &script,
        "#!/bin/sh\nM=\"$3\"; D=\"$5\"; mkdir -p \"$D\"; n=$(wc -l < \"$M\")\n\
         ls \"$(dirname \"$M\")/images\" | grep -q tensor || exit 4\n\
         echo \"{\\\"classes\\\":[\\\"C30\\\",\\\"C40\\\",\\\"C50\\\"],\\\"runs\\\":[],\\\"accuracy_mean\\\":0.5,\\\"accuracy_std\\\":0.0,\\\"confusion\\\":[[$n,0,0],[0,0,0],[0,0,0]]}\" > \"$D/metrics.json\"\n",
    )
    .unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    std::env::set_var(peh::cnn::CNN_BIN_ENV, &script);
    let mut cfg = small_config([4, 4, 4], vec![0.15]);
    cfg.classifier = peh::sweep::ClassifierKind::ExternalCnn;
    let report = run_sweep(&cfg, &RustFft::new(), Some(dir.path())).unwrap();
    let m = report.devices[0].metrics.as_ref().unwrap();
    assert_eq!(m.confusion[0][0], 12);
    let manifest = peh::dataset::load_manifest(&dir.path().join("cnn/L150mm/manifest.jsonl")).unwrap();
    let img = peh::io::read_tensor(manifest.records[0].image.as_ref().unwrap()).unwrap();
    assert_eq!((img.height, img.width), (224, 224));
}
