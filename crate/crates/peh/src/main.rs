use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use peh::dataset::{load_labeled_accel, load_manifest, synth_dataset};
use peh::error::{Error, Result};
use peh::fft::RustFft;
use peh::io::{read_json, read_timeseries, write_json, write_png, write_tensor, write_timeseries};
use peh::pipeline::{event_scalogram, scalogram_features, scalogram_image, window_start, FeatureOpts};
use peh::report::emit_report;
use peh::sweep::{run_sweep, ClassifierKind, SweepConfig};
use peh_core::classify::{evaluate, train_baseline, MajorityTrainer, Metrics, TrainOpts};
use peh_core::signal::{detect_events, estimate_speed_pairs, DetectOpts, SpeedOpts};
use peh_core::synth::TrafficScenario;
use peh_core::{build_model, harvested_energy, simulate_voltage, DeviceConfig, Integrator, ReducedModel, SolverOpts};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "peh", version, about = "Piezoelectric harvester modelling, traffic signal processing and device sweeps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Device selection shared by several commands.
#[derive(clap::Args)]
struct DeviceArgs {
    /// Saved reduced model (JSON from `peh model`).
    #[arg(long, conflicts_with_all = ["config", "length"])]
    model: Option<PathBuf>,
    /// Device configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cantilever length in metres, overriding the configuration.
    #[arg(long)]
    length: Option<f64>,
}

impl DeviceArgs {
    fn present(&self) -> bool {
        self.model.is_some() || self.config.is_some() || self.length.is_some()
    }

    fn load(&self) -> Result<ReducedModel> {
        if let Some(p) = &self.model {
            return read_json(p);
        }
        let mut cfg = match &self.config {
            Some(p) => read_json::<DeviceConfig>(p)?,
            None => DeviceConfig::default(),
        };
        if let Some(l) = self.length {
            cfg = cfg.with_length(l);
        }
        Ok(build_model(&cfg)?)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the reduced model of a device and print its natural frequencies.
    Model {
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the load voltage for a base-acceleration record.
    Simulate {
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long)]
        accel: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "exact-hold")]
        integrator: IntegratorArg,
        #[arg(long, default_value_t = 1e-6)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-9)]
        atol: f64,
    },
    /// Energy dissipated in the load over `[t1, t2]`.
    Energy {
        #[arg(long = "volts")]
        voltage: PathBuf,
        /// Load resistance in ohms.
        #[arg(long = "rl", default_value_t = 100.0)]
        resistance: f64,
        #[arg(long = "from")]
        t1: Option<f64>,
        #[arg(long = "to")]
        t2: Option<f64>,
    },
    /// Detect vehicle events in an acceleration record.
    Events {
        #[arg(long)]
        accel: PathBuf,
        #[arg(long)]
        k: Option<f64>,
        /// Write each event window as `<dir>/event_NNN.csv`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Morlet scalogram of the first event window, as PNG and/or tensor.
    Cwt {
        #[arg(long)]
        accel: PathBuf,
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long)]
        tensor: Option<PathBuf>,
    },
    /// Vehicle speed from one or more strain-gauge pairs.
    Speed {
        /// Strain records, taken two at a time as (upstream, downstream).
        #[arg(long, num_args = 2.., required = true)]
        strains: Vec<PathBuf>,
        #[arg(long, default_value_t = 9.0)]
        spacing: f64,
    },
    /// Generate a labeled synthetic dataset with a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Events per class `C30,C40,C50`.
        #[arg(long, value_delimiter = ',', default_values_t = [154usize, 116, 30])]
        mix: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Scenario JSON overriding the generator defaults.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Fit the baseline classifier on every labeled event of a manifest.
    TrainBaseline {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated-split evaluation of the baseline classifier.
    EvalBaseline {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Co-design sweep over device lengths.
    Sweep {
        /// Sweep configuration JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        classifier: Option<ClassifierKind>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum IntegratorArg {
    ExactHold,
    DormandPrince,
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| Error::Usage(e.to_string()))?);
    Ok(())
}

/// Features of every labeled event in a manifest for one (optional) device.
fn manifest_features(manifest: &Path, device: &DeviceArgs) -> Result<(Vec<Vec<f64>>, Vec<usize>, usize)> {
    let events = load_labeled_accel(&load_manifest(manifest)?)?;
    let model = if device.present() { Some(device.load()?) } else { None };
    let opts = FeatureOpts::default();
    let fft = RustFft::new();
    let rows: Vec<Option<(Vec<f64>, usize)>> = events
        .par_iter()
        .map(|(_, accel, class)| {
            let Some(start) = window_start(accel, &opts)? else { return Ok(None) };
            let sc = event_scalogram(&fft, model.as_ref(), accel, start, &opts)?;
            Ok(Some((scalogram_features(&sc, &opts)?, class.index().unwrap())))
        })
        .collect::<Result<_>>()?;
    let dropped = rows.iter().filter(|r| r.is_none()).count();
    let (x, y) = rows.into_iter().flatten().unzip();
    Ok((x, y, dropped))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Model { device, out } => {
            let m = device.load()?;
            for (i, f) in m.natural_freqs_hz().iter().enumerate() {
                println!("mode {}: {f:.4} Hz (zeta {:.4})", i + 1, m.damping_ratio(i));
            }
            println!("capacitance: {:.6e} F", m.capacitance);
            if let Some(out) = out {
                write_json(&out, &m)?;
            }
        }
        Cmd::Simulate { device, accel, out, integrator, rtol, atol } => {
            let m = device.load()?;
            let a = read_timeseries(&accel)?;
            let method = match integrator {
                IntegratorArg::ExactHold => Integrator::ExactHold,
                IntegratorArg::DormandPrince => Integrator::DormandPrince,
            };
            let v = simulate_voltage(&m, &a, &SolverOpts { method, rtol, atol, ..SolverOpts::default() })?;
            write_timeseries(&out, &v)?;
        }
        Cmd::Energy { voltage, resistance, t1, t2 } => {
            let v = read_timeseries(&voltage)?;
            let e = harvested_energy(&v, resistance, t1.unwrap_or(v.start_time), t2.unwrap_or(v.end_time()))?;
            println!("{e:e}");
        }
        Cmd::Events { accel, k, out_dir } => {
            let a = read_timeseries(&accel)?;
            let mut opts = DetectOpts::default();
            if let Some(k) = k {
                opts.k = k;
            }
            let events = detect_events(&a, &opts)?;
            for (i, e) in events.iter().enumerate() {
                println!("{i:3}  peak {:.3} s  window [{:.3}, {:.3}] s", e.peak_time, e.start, e.end);
                if let Some(dir) = &out_dir {
                    write_timeseries(&dir.join(format!("event_{i:03}.csv")), &e.accel)?;
                }
            }
        }
        Cmd::Cwt { accel, device, png, tensor } => {
            let a = read_timeseries(&accel)?;
            let opts = FeatureOpts::default();
            let start = window_start(&a, &opts)?.ok_or_else(|| Error::Usage("no event found in record".into()))?;
            let model = if device.present() { Some(device.load()?) } else { None };
            let sc = event_scalogram(&RustFft::new(), model.as_ref(), &a, start, &opts)?;
            let img = scalogram_image(&sc, &opts)?;
            if let Some(p) = png {
                write_png(&p, &img)?;
            }
            if let Some(p) = tensor {
                write_tensor(&p, &img)?;
            }
            if sc.n_times() > 0 {
                let f = sc.ridge_hz(sc.n_times() / 2);
                println!("ridge at window centre: {f:.2} Hz");
            }
        }
        Cmd::Speed { strains, spacing } => {
            if strains.len() % 2 != 0 {
                return Err(Error::Usage("strain records must come in pairs".into()));
            }
            let series = strains.iter().map(|p| read_timeseries(p)).collect::<Result<Vec<_>>>()?;
            let pairs: Vec<_> = series.chunks(2).map(|c| (&c[0], &c[1])).collect();
            let est = estimate_speed_pairs(&RustFft::new(), &pairs, spacing, &SpeedOpts::default())?;
            println!("{:.2} km/h  class {}{}", est.speed_kmh, est.label.class, if est.flagged { "  (flagged)" } else { "" });
        }
        Cmd::Synth { out, mix, seed, scenario } => {
            let mix: [usize; 3] = mix.try_into().map_err(|_| Error::Usage("--mix needs three counts".into()))?;
            let scn = match scenario {
                Some(p) => read_json::<TrafficScenario>(&p)?,
                None => TrafficScenario::default(),
            };
            let m = synth_dataset(mix, &scn, seed, &out)?;
            println!("{} events written to {}", m.records.len(), out.display());
        }
        Cmd::TrainBaseline { manifest, device, out } => {
            let (x, y, dropped) = manifest_features(&manifest, &device)?;
            let model = train_baseline(&x, &y, 3, &TrainOpts::default())?;
            eprintln!("trained on {} events ({dropped} without a detectable event)", x.len());
            write_json(&out, &model)?;
        }
        Cmd::EvalBaseline { manifest, device, runs, seed, out } => {
            let (x, y, dropped) = manifest_features(&manifest, &device)?;
            let protocol = peh_core::classify::Protocol { runs, seed, ..Default::default() };
            let metrics: Metrics = evaluate(&TrainOpts::default(), &x, &y, &protocol)?;
            let majority = evaluate(&MajorityTrainer, &x, &y, &protocol)?;
            println!(
                "accuracy {:.3} ± {:.3}  (majority {:.3}, {} events, {dropped} dropped)",
                metrics.accuracy_mean,
                metrics.accuracy_std,
                majority.accuracy_mean,
                x.len()
            );
            match out {
                Some(p) => write_json(&p, &metrics)?,
                None => print_json(&metrics.confusion)?,
            }
        }
        Cmd::Sweep { config, out, classifier, manifest } => {
            let mut cfg = match config {
                Some(p) => read_json::<SweepConfig>(&p)?,
                None => SweepConfig::default(),
            };
            if let Some(c) = classifier {
                cfg.classifier = c;
            }
            if let Some(path) = manifest {
                cfg.dataset = peh::sweep::DatasetSource::Manifest { path };
            }
            let report = run_sweep(&cfg, &RustFft::new(), Some(&out))?;
            emit_report(&report, &out)?;
            print!("{}", report.table());
            return Ok(!report.any_failed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    peh::init_workers();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
