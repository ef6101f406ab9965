//! The device-family study: for each cantilever length, classify traffic
//! events from the simulated voltage and integrate the harvested energy over
//! long traffic windows.

use std::path::{Path, PathBuf};

use peh_core::classify::{evaluate, Metrics, Protocol, TrainOpts};
use peh_core::signal::SpeedClass;
use peh_core::synth::{plan_dataset, synth_event, StreamSpec, TrafficScenario, TrafficStream};
use peh_core::{build_model, frf_voltage, DeviceConfig, EnergyAccumulator, ExactHold, ReducedModel, TimeSeries};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnn::{cnn_program, run_external_cnn};
use crate::dataset::{load_labeled_accel, load_manifest, write_manifest, ManifestRecord, MANIFEST_NAME};
use crate::error::{Error, Result};
use crate::fft::Fft;
use crate::io::{read_timeseries, write_tensor};
use crate::pipeline::{event_scalogram, scalogram_features, scalogram_image, window_start, FeatureOpts};
use crate::report::{DeviceRecord, DeviceStatus, SweepReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    #[default]
    Baseline,
    ExternalCnn,
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ClassifierKind::Baseline),
            "external-cnn" => Ok(ClassifierKind::ExternalCnn),
            other => Err(Error::Usage(format!("unknown classifier `{other}`, expected baseline or external-cnn"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic { mix: [usize; 3], seed: u64, scenario: TrafficScenario },
    Manifest { path: PathBuf },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic { mix: [154, 116, 30], seed: 7, scenario: TrafficScenario::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub start_s: f64,
    pub end_s: f64,
    /// Seed of the synthetic traffic stream; ignored for recorded input.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergySpec {
    pub windows: Vec<EnergyWindow>,
    pub vehicles_per_hour: f64,
    /// Recorded acceleration to integrate over instead of synthetic streams.
    pub record: Option<PathBuf>,
}

impl Default for EnergySpec {
    fn default() -> Self {
        Self {
            windows: (0..5).map(|i| EnergyWindow { start_s: 0.0, end_s: 12.0 * 3600.0, seed: 1000 + i }).collect(),
            vehicles_per_hour: 120.0,
            record: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub lengths: Vec<f64>,
    pub base: DeviceConfig,
    pub dataset: DatasetSource,
    pub energy: EnergySpec,
    pub protocol: Protocol,
    pub classifier: ClassifierKind,
    pub train: TrainOpts,
    pub features: FeatureOpts,
    pub frf_max_hz: f64,
    pub frf_step_hz: f64,
    /// Overrides the excitation frequency the energy optimum is compared with.
    pub dominant_excitation_hz: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lengths: vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
            base: DeviceConfig::default(),
            dataset: DatasetSource::default(),
            energy: EnergySpec::default(),
            protocol: Protocol::default(),
            classifier: ClassifierKind::Baseline,
            train: TrainOpts::default(),
            features: FeatureOpts::default(),
            frf_max_hz: 200.0,
            frf_step_hz: 0.25,
            dominant_excitation_hz: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::Usage("sweep needs at least one length".into()));
        }
        for (i, l) in self.lengths.iter().enumerate() {
            if !(*l > 0.0 && l.is_finite()) {
                return Err(Error::Usage(format!("length {l} must be positive")));
            }
            if self.lengths[..i].contains(l) {
                return Err(Error::Usage(format!("length {l} listed twice")));
            }
        }
        if self.energy.windows.iter().any(|w| !(w.end_s > w.start_s && w.start_s >= 0.0)) {
            return Err(Error::Usage("energy windows need 0 <= start < end".into()));
        }
        if !(self.frf_step_hz > 0.0 && self.frf_max_hz > 0.0) {
            return Err(Error::Usage("FRF grid must be positive".into()));
        }
        Ok(())
    }

    fn scenario(&self) -> TrafficScenario {
        match &self.dataset {
            DatasetSource::Synthetic { scenario, .. } => scenario.clone(),
            DatasetSource::Manifest { .. } => TrafficScenario::default(),
        }
    }
}

/// Labeled acceleration records with the start of their event window.
struct Event {
    id: String,
    accel: TimeSeries,
    label: usize,
    start: usize,
}

fn load_events(cfg: &SweepConfig) -> Result<(Vec<Event>, usize)> {
    let raw: Vec<(String, TimeSeries, SpeedClass)> = match &cfg.dataset {
        DatasetSource::Synthetic { mix, seed, scenario } => plan_dataset(*mix, *seed)?
            .par_iter()
            .map(|p| {
                let ev = synth_event(&p.scenario(scenario))?;
                Ok((format!("e{:05}", p.index), ev.accel, p.class))
            })
            .collect::<Result<_>>()?,
        DatasetSource::Manifest { path } => load_labeled_accel(&load_manifest(path)?)?,
    };
    let total = raw.len();
    let located: Vec<Option<Event>> = raw
        .into_par_iter()
        .map(|(id, accel, class)| {
            let start = window_start(&accel, &cfg.features)?;
            Ok(start.map(|start| Event { id, accel, label: class.index().unwrap(), start }))
        })
        .collect::<Result<_>>()?;
    Ok((located.into_iter().flatten().collect(), total))
}

fn classify_device(
    cfg: &SweepConfig,
    fft: &dyn Fft,
    model: &ReducedModel,
    length: f64,
    events: &[Event],
    work_dir: Option<&Path>,
) -> Result<Metrics> {
    let labels: Vec<usize> = events.iter().map(|e| e.label).collect();
    match cfg.classifier {
        ClassifierKind::Baseline => {
            let features = events
                .par_iter()
                .map(|e| {
                    let sc = event_scalogram(fft, Some(model), &e.accel, e.start, &cfg.features)?;
                    scalogram_features(&sc, &cfg.features)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(evaluate(&cfg.train, &features, &labels, &cfg.protocol)?)
        }
        ClassifierKind::ExternalCnn => {
            let dir = work_dir
                .ok_or_else(|| Error::Usage("external classifier needs an output directory".into()))?
                .join("cnn")
                .join(device_tag(length));
            let records = events
                .par_iter()
                .map(|e| {
                    let sc = event_scalogram(fft, Some(model), &e.accel, e.start, &cfg.features)?;
                    let image = PathBuf::from("images").join(format!("{}.tensor", e.id));
                    write_tensor(&dir.join(&image), &scalogram_image(&sc, &cfg.features)?)?;
                    Ok(ManifestRecord {
                        id: e.id.clone(),
                        accel: PathBuf::new(),
                        strains: Vec::new(),
                        speed_kmh: None,
                        class: SpeedClass::LABELED[e.label],
                        peak_time_s: None,
                        image: Some(image),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let manifest = dir.join(MANIFEST_NAME);
            write_manifest(&manifest, &records)?;
            run_external_cnn(&cnn_program(), &manifest, &dir.join("result"))
        }
    }
}

/// Directory-safe name for a device, e.g. `L150mm`.
pub fn device_tag(length_m: f64) -> String {
    format!("L{:03}mm", (length_m * 1000.0).round() as i64)
}

const CHUNK: usize = 60_000;

/// Energy per window for each model, `result[device][window]`.
fn window_energies(cfg: &SweepConfig, models: &[&ReducedModel]) -> Result<Vec<Vec<f64>>> {
    let per_window: Vec<Vec<f64>> = match &cfg.energy.record {
        Some(path) => {
            let accel = read_timeseries(path)?;
            models
                .par_iter()
                .map(|m| {
                    let v = crate::pipeline::device_signal(Some(m), &accel)?;
                    cfg.energy
                        .windows
                        .iter()
                        .map(|w| {
                            let t1 = accel.start_time + w.start_s;
                            let t2 = (accel.start_time + w.end_s).min(accel.end_time());
                            Ok(peh_core::harvested_energy(&v, m.load_resistance, t1, t2)?)
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            let scenario = cfg.scenario();
            let by_window = cfg
                .energy
                .windows
                .par_iter()
                .map(|w| stream_energy(&scenario, cfg, w, models))
                .collect::<Result<Vec<_>>>()?;
            (0..models.len()).map(|d| by_window.iter().map(|w| w[d]).collect()).collect()
        }
    };
    Ok(per_window)
}

/// Drive every device with one synthetic traffic stream and integrate the
/// power over the samples in `[start, end]`.
fn stream_energy(scenario: &TrafficScenario, cfg: &SweepConfig, w: &EnergyWindow, models: &[&ReducedModel]) -> Result<Vec<f64>> {
    let spec = StreamSpec {
        duration_s: w.end_s,
        vehicles_per_hour: cfg.energy.vehicles_per_hour,
        seed: w.seed,
        ..StreamSpec::default()
    };
    let mut stream = TrafficStream::new(scenario, &spec)?;
    let fs = stream.sample_rate();
    let first = (w.start_s * fs).round() as usize;
    let mut lti: Vec<ExactHold> = models.iter().map(|m| ExactHold::new(m, fs)).collect::<peh_core::Result<_>>()?;
    let mut acc: Vec<EnergyAccumulator> = models.iter().map(|m| EnergyAccumulator::new(fs, m.load_resistance)).collect();
    let mut buf = Vec::with_capacity(CHUNK);
    let mut prev: Option<f64> = None;
    let mut index = 0usize;
    while stream.next_chunk(&mut buf, CHUNK) > 0 {
        for (sys, e) in lti.iter_mut().zip(acc.iter_mut()) {
            let mut p = prev;
            for (k, &u) in buf.iter().enumerate() {
                let v = match p {
                    None => sys.voltage(),
                    Some(u0) => sys.step(u0, u),
                };
                if index + k >= first {
                    e.push(v);
                }
                p = Some(u);
            }
        }
        prev = buf.last().copied();
        index += buf.len();
    }
    Ok(acc.iter().map(|e| e.energy()).collect())
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = if x.len() > 1 { (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, std)
}

/// Run the full study. `work_dir` receives intermediate files for the external classifier.
pub fn run_sweep(cfg: &SweepConfig, fft: &dyn Fft, work_dir: Option<&Path>) -> Result<SweepReport> {
    cfg.validate()?;
    let (events, total) = load_events(cfg)?;
    let labels: Vec<usize> = events.iter().map(|e| e.label).collect();
    let mut counts = [0usize; 3];
    labels.iter().for_each(|l| counts[*l] += 1);
    let majority_baseline = *counts.iter().max().unwrap() as f64 / labels.len().max(1) as f64;

    let models: Vec<std::result::Result<ReducedModel, String>> = cfg
        .lengths
        .par_iter()
        .map(|&l| build_model(&cfg.base.with_length(l)).map_err(|e| e.to_string()))
        .collect();

    let mut devices: Vec<DeviceRecord> = cfg
        .lengths
        .par_iter()
        .zip(models.par_iter())
        .map(|(&length, model)| {
            let mut rec = DeviceRecord::new(length);
            let model = match model {
                Ok(m) => m,
                Err(reason) => {
                    rec.status = DeviceStatus::Failed { reason: reason.clone() };
                    return rec;
                }
            };
            rec.natural_freqs_hz = model.natural_freqs_hz();
            rec.capacitance_f = model.capacitance;
            let n = (cfg.frf_max_hz / cfg.frf_step_hz).round() as usize;
            let grid: Vec<f64> = (0..=n).map(|i| i as f64 * cfg.frf_step_hz).collect();
            match frf_voltage(model, &grid) {
                Ok(curve) => {
                    rec.frf_peak_hz = curve.peaks_hz().first().copied();
                    rec.frf_magnitude = curve.magnitude();
                    rec.frf_freqs_hz = grid;
                }
                Err(e) => rec.status = DeviceStatus::Failed { reason: e.to_string() },
            }
            if rec.status.is_ok() {
                match classify_device(cfg, fft, model, length, &events, work_dir) {
                    Ok(m) => {
                        rec.accuracy_mean = Some(m.accuracy_mean);
                        rec.accuracy_std = Some(m.accuracy_std);
                        rec.metrics = Some(m);
                    }
                    Err(e) => rec.status = DeviceStatus::Failed { reason: e.to_string() },
                }
            }
            rec
        })
        .collect();

    let live: Vec<usize> = (0..devices.len()).filter(|&i| devices[i].status.is_ok()).collect();
    let live_models: Vec<&ReducedModel> = live.iter().map(|&i| models[i].as_ref().unwrap()).collect();
    if !live_models.is_empty() {
        let energies = window_energies(cfg, &live_models)?;
        for (&i, e) in live.iter().zip(energies) {
            let (mean, std) = mean_std(&e);
            devices[i].energy_j = e;
            devices[i].energy_mean_j = Some(mean);
            devices[i].energy_std_j = Some(std);
        }
    }

    let dominant = cfg.dominant_excitation_hz.or(match &cfg.dataset {
        DatasetSource::Synthetic { scenario, .. } => Some(scenario.dominant_freq_hz()),
        DatasetSource::Manifest { .. } => None,
    });
    Ok(SweepReport::assemble(devices, total, events.len(), majority_baseline, dominant, cfg.energy.windows.len(), cfg.protocol.runs))
}
