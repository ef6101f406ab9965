//! Event manifests (JSON lines) and synthetic dataset generation on disk.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use peh_core::signal::SpeedClass;
use peh_core::synth::{plan_dataset, synth_event, EventPlan, TrafficScenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::io::{read_timeseries, write_timeseries};

/// One event; paths are relative to the manifest file unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    /// Empty for image-only records.
    #[serde(default, skip_serializing_if = "is_empty_path")]
    pub accel: PathBuf,
    /// `[pair0_a, pair0_b, pair1_a, pair1_b]` when strain data exist.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strains: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_kmh: Option<f64>,
    pub class: SpeedClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

fn is_empty_path(p: &Path) -> bool {
    p.as_os_str().is_empty()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    /// Events per class in `[C30, C40, C50, Excluded]` order.
    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for r in &self.records {
            c[r.class.index().unwrap_or(3)] += 1;
        }
        c
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
}

/// Read a manifest and resolve its relative paths against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = File::open(path).map_err(io_err(path))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: ManifestRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { path: path.to_path_buf(), line: i + 1, message: e.to_string() })?;
        if !is_empty_path(&rec.accel) {
            rec.accel = resolve(&base, &rec.accel);
        }
        rec.strains = rec.strains.iter().map(|s| resolve(&base, s)).collect();
        rec.image = rec.image.as_deref().map(|s| resolve(&base, s));
        records.push(rec);
    }
    Ok(DatasetManifest { records })
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// Generate, write and index a labeled synthetic dataset under `out_dir`.
pub fn synth_dataset(mix: [usize; 3], template: &TrafficScenario, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    template.validate()?;
    let plan = plan_dataset(mix, seed)?;
    let records = plan
        .par_iter()
        .map(|p| write_event(p, template, out_dir))
        .collect::<Result<Vec<_>>>()?;
    let manifest_path = out_dir.join(MANIFEST_NAME);
    write_manifest(&manifest_path, &records)?;
    load_manifest(&manifest_path)
}

fn write_event(plan: &EventPlan, template: &TrafficScenario, out_dir: &Path) -> Result<ManifestRecord> {
    let ev = synth_event(&plan.scenario(template))?;
    let id = format!("e{:05}", plan.index);
    let rel = |suffix: &str| PathBuf::from("events").join(format!("{id}_{suffix}.csv"));
    let accel = rel("accel");
    write_timeseries(&out_dir.join(&accel), &ev.accel)?;
    let mut strains = Vec::with_capacity(4);
    for (s, name) in ev.strains.iter().zip(["strain_1a", "strain_1b", "strain_2a", "strain_2b"]) {
        let p = rel(name);
        write_timeseries(&out_dir.join(&p), s)?;
        strains.push(p);
    }
    Ok(ManifestRecord {
        id,
        accel,
        strains,
        speed_kmh: Some(plan.speed_kmh),
        class: ev.truth.class,
        peak_time_s: None,
        image: None,
    })
}

/// Acceleration and class of every labeled record, in manifest order.
pub fn load_labeled_accel(manifest: &DatasetManifest) -> Result<Vec<(String, peh_core::TimeSeries, SpeedClass)>> {
    manifest
        .records
        .par_iter()
        .filter(|r| r.class != SpeedClass::Excluded)
        .map(|r| Ok((r.id.clone(), read_timeseries(&r.accel)?, r.class)))
        .collect()
}
