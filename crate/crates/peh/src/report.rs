//! Sweep results and their on-disk forms: JSON, a text table, FRF CSVs and
//! a handful of SVG charts.

use std::fmt::Write as _;
use std::path::Path;

use peh_core::classify::Metrics;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{write_bytes, write_json};
use crate::sweep::device_tag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum DeviceStatus {
    Ok,
    Failed { reason: String },
}

impl DeviceStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, DeviceStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub length_m: f64,
    pub status: DeviceStatus,
    pub natural_freqs_hz: Vec<f64>,
    pub capacitance_f: f64,
    pub frf_peak_hz: Option<f64>,
    pub frf_freqs_hz: Vec<f64>,
    pub frf_magnitude: Vec<f64>,
    /// Energy per window in joules.
    pub energy_j: Vec<f64>,
    pub energy_mean_j: Option<f64>,
    pub energy_std_j: Option<f64>,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub metrics: Option<Metrics>,
}

impl DeviceRecord {
    pub fn new(length_m: f64) -> Self {
        Self {
            length_m,
            status: DeviceStatus::Ok,
            natural_freqs_hz: Vec::new(),
            capacitance_f: 0.0,
            frf_peak_hz: None,
            frf_freqs_hz: Vec::new(),
            frf_magnitude: Vec::new(),
            energy_j: Vec::new(),
            energy_mean_j: None,
            energy_std_j: None,
            accuracy_mean: None,
            accuracy_std: None,
            metrics: None,
        }
    }

    pub fn f1_hz(&self) -> Option<f64> {
        self.natural_freqs_hz.first().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub devices: Vec<DeviceRecord>,
    pub events_total: usize,
    pub events_used: usize,
    /// Events for which no window could be located.
    pub events_dropped: usize,
    pub energy_windows: usize,
    pub runs: usize,
    /// Accuracy of always predicting the most common class.
    pub majority_baseline: f64,
    pub energy_argmax_length_m: Option<f64>,
    pub accuracy_argmax_length_m: Option<f64>,
    pub optima_coincide: Option<bool>,
    pub dominant_excitation_hz: Option<f64>,
    /// Device whose first natural frequency lies closest to the excitation.
    pub nearest_f1_length_m: Option<f64>,
    pub energy_optimum_matches_excitation: Option<bool>,
    pub any_failed: bool,
}

fn argmax_by(devices: &[DeviceRecord], key: impl Fn(&DeviceRecord) -> Option<f64>) -> Option<f64> {
    devices
        .iter()
        .filter_map(|d| key(d).filter(|v| v.is_finite()).map(|v| (d.length_m, v)))
        .fold(None, |best: Option<(f64, f64)>, (l, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((l, v)),
        })
        .map(|(l, _)| l)
}

impl SweepReport {
    pub fn assemble(
        devices: Vec<DeviceRecord>,
        events_total: usize,
        events_used: usize,
        majority_baseline: f64,
        dominant_excitation_hz: Option<f64>,
        energy_windows: usize,
        runs: usize,
    ) -> Self {
        let energy_argmax_length_m = argmax_by(&devices, |d| d.energy_mean_j);
        let accuracy_argmax_length_m = argmax_by(&devices, |d| d.accuracy_mean);
        let optima_coincide = match (energy_argmax_length_m, accuracy_argmax_length_m) {
            (Some(a), Some(b)) => Some(a == b),
            _ => None,
        };
        let nearest_f1_length_m = dominant_excitation_hz.and_then(|f| {
            argmax_by(&devices, |d| if d.status.is_ok() { d.f1_hz().map(|f1| -(f1 - f).abs()) } else { None })
        });
        let energy_optimum_matches_excitation = match (energy_argmax_length_m, nearest_f1_length_m) {
            (Some(a), Some(b)) => Some(a == b),
            _ => None,
        };
        let any_failed = devices.iter().any(|d| !d.status.is_ok());
        Self {
            devices,
            events_total,
            events_used,
            events_dropped: events_total - events_used,
            energy_windows,
            runs,
            majority_baseline,
            energy_argmax_length_m,
            accuracy_argmax_length_m,
            optima_coincide,
            dominant_excitation_hz,
            nearest_f1_length_m,
            energy_optimum_matches_excitation,
            any_failed,
        }
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>8} {:>10} {:>10} {:>12} {:>12} {:>9} {:>9}  status",
            "L_cm", "f1_Hz", "peak_Hz", "E_mean_J", "E_std_J", "acc", "acc_std"
        );
        for d in &self.devices {
            let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
            let sci = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3e}"));
            let status = match &d.status {
                DeviceStatus::Ok => "ok".to_string(),
                DeviceStatus::Failed { reason } => format!("failed: {reason}"),
            };
            let _ = writeln!(
                s,
                "{:>8.1} {:>10} {:>10} {:>12} {:>12} {:>9} {:>9}  {}",
                d.length_m * 100.0,
                opt(d.f1_hz(), 2),
                opt(d.frf_peak_hz, 2),
                sci(d.energy_mean_j),
                sci(d.energy_std_j),
                opt(d.accuracy_mean, 3),
                opt(d.accuracy_std, 3),
                status
            );
        }
        let cm = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.1} cm", x * 100.0));
        let yn = |v: Option<bool>| v.map_or("-", |b| if b { "yes" } else { "no" });
        let _ = writeln!(s);
        let _ = writeln!(s, "events: {} used, {} dropped", self.events_used, self.events_dropped);
        let _ = writeln!(s, "majority baseline: {:.3}", self.majority_baseline);
        let _ = writeln!(s, "energy optimum: {}", cm(self.energy_argmax_length_m));
        let _ = writeln!(s, "accuracy optimum: {}", cm(self.accuracy_argmax_length_m));
        let _ = writeln!(s, "optima coincide: {}", yn(self.optima_coincide));
        if let Some(f) = self.dominant_excitation_hz {
            let _ = writeln!(s, "dominant excitation: {f:.2} Hz, nearest f1: {}", cm(self.nearest_f1_length_m));
            let _ = writeln!(s, "energy optimum at nearest f1: {}", yn(self.energy_optimum_matches_excitation));
        }
        s
    }
}

/// Write `report.json`, `report.txt`, `frf/<device>.csv` and the SVG charts.
pub fn emit_report(report: &SweepReport, out_dir: &Path) -> Result<()> {
    write_json(&out_dir.join("report.json"), report)?;
    write_bytes(&out_dir.join("report.txt"), report.table().as_bytes())?;
    for d in report.devices.iter().filter(|d| !d.frf_freqs_hz.is_empty()) {
        let mut csv = String::from("freq_hz,magnitude_v_per_ms2\n");
        for (f, m) in d.frf_freqs_hz.iter().zip(&d.frf_magnitude) {
            let _ = writeln!(csv, "{f},{m:e}");
        }
        write_bytes(&out_dir.join("frf").join(format!("{}.csv", device_tag(d.length_m))), csv.as_bytes())?;
    }
    write_bytes(&out_dir.join("frf_overlay.svg"), frf_overlay(report).as_bytes())?;
    let bars = |f: fn(&DeviceRecord) -> (Option<f64>, Option<f64>)| -> Vec<(String, f64, f64)> {
        report
            .devices
            .iter()
            .filter_map(|d| {
                let (m, s) = f(d);
                m.map(|m| (format!("{:.0}", d.length_m * 100.0), m, s.unwrap_or(0.0)))
            })
            .collect()
    };
    let energy = bars(|d| (d.energy_mean_j, d.energy_std_j));
    let accuracy = bars(|d| (d.accuracy_mean, d.accuracy_std));
    write_bytes(&out_dir.join("energy_bars.svg"), bar_chart("Harvested energy [J]", &energy).as_bytes())?;
    write_bytes(&out_dir.join("accuracy_bars.svg"), bar_chart("Accuracy", &accuracy).as_bytes())?;
    write_bytes(&out_dir.join("energy_vs_accuracy.svg"), scatter(report).as_bytes())?;
    Ok(())
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn svg_open(title: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        "<path d=\"M{M} {M} V{} H{}\" stroke=\"black\" fill=\"none\"/>",
        H - M,
        W - M / 2.0
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(s: &mut String, x: f64, y: f64, anchor: &str, text: &str) {
    let _ = writeln!(
        s,
        "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
        escape(text)
    );
}

/// Map `v` from `[lo, hi]` onto the plot area along one axis.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo { a + (v - lo) / (hi - lo) * (b - a) } else { (a + b) / 2.0 }
}

fn frf_overlay(report: &SweepReport) -> String {
    let mut s = svg_open("Voltage FRF magnitude [V/(m/s²)], log scale");
    let curves: Vec<&DeviceRecord> = report.devices.iter().filter(|d| !d.frf_freqs_hz.is_empty()).collect();
    let logs = |d: &DeviceRecord| -> Vec<(f64, f64)> {
        d.frf_freqs_hz
            .iter()
            .zip(&d.frf_magnitude)
            .filter(|(_, m)| **m > 0.0)
            .map(|(f, m)| (*f, m.log10()))
            .collect()
    };
    let all: Vec<(f64, f64)> = curves.iter().flat_map(|d| logs(d)).collect();
    let (fmax, ylo, yhi) = all.iter().fold((0.0f64, f64::INFINITY, f64::NEG_INFINITY), |(f, lo, hi), (x, y)| {
        (f.max(*x), lo.min(*y), hi.max(*y))
    });
    for (i, d) in curves.iter().enumerate() {
        let pts: Vec<String> = logs(d)
            .iter()
            .map(|(f, y)| format!("{:.1},{:.1}", scale(*f, 0.0, fmax, M, W - M / 2.0), scale(*y, ylo, yhi, H - M, M)))
            .collect();
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>", pts.join(" "));
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\" font-family=\"sans-serif\" font-size=\"11\">{:.0} cm</text>",
            W - M - 10.0,
            M + 14.0 * i as f64,
            d.length_m * 100.0
        );
    }
    if fmax > 0.0 {
        label(&mut s, M, H - M + 16.0, "middle", "0");
        label(&mut s, W - M / 2.0, H - M + 16.0, "middle", &format!("{fmax:.0} Hz"));
        label(&mut s, M - 4.0, M + 4.0, "end", &format!("1e{yhi:.1}"));
        label(&mut s, M - 4.0, H - M, "end", &format!("1e{ylo:.1}"));
    }
    s.push_str("</svg>\n");
    s
}

fn bar_chart(title: &str, bars: &[(String, f64, f64)]) -> String {
    let mut s = svg_open(title);
    let top = bars.iter().map(|(_, m, e)| m + e).fold(0.0f64, f64::max);
    let slot = (W - 1.5 * M) / bars.len().max(1) as f64;
    for (i, (name, mean, err)) in bars.iter().enumerate() {
        let x0 = M + slot * i as f64 + slot * 0.15;
        let y = scale(*mean, 0.0, top, H - M, M);
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\"/>",
            slot * 0.7,
            (H - M - y).max(0.0),
            PALETTE[0]
        );
        let xc = x0 + slot * 0.35;
        let (ya, yb) = (scale(mean - err, 0.0, top, H - M, M), scale(mean + err, 0.0, top, H - M, M));
        let _ = writeln!(s, "<path d=\"M{xc:.1} {ya:.1} V{yb:.1} M{:.1} {yb:.1} h8 M{:.1} {ya:.1} h8\" stroke=\"black\"/>", xc - 4.0, xc - 4.0);
        label(&mut s, xc, H - M + 16.0, "middle", &format!("{name} cm"));
    }
    label(&mut s, M - 4.0, M + 4.0, "end", &format!("{top:.3e}"));
    label(&mut s, M - 4.0, H - M, "end", "0");
    s.push_str("</svg>\n");
    s
}

fn scatter(report: &SweepReport) -> String {
    let mut s = svg_open("Energy vs accuracy");
    let pts: Vec<(f64, f64, f64)> = report
        .devices
        .iter()
        .filter_map(|d| Some((d.length_m, d.energy_mean_j?, d.accuracy_mean?)))
        .collect();
    let (elo, ehi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (alo, ahi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.2), b.max(p.2)));
    for (l, e, a) in &pts {
        let x = scale(*e, elo, ehi, M + 20.0, W - M);
        let y = scale(*a, alo, ahi, H - M - 20.0, M + 20.0);
        let _ = writeln!(s, "<circle class=\"device\" cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"5\" fill=\"{}\"/>", PALETTE[3]);
        label(&mut s, x + 8.0, y - 6.0, "start", &format!("{:.0} cm", l * 100.0));
    }
    if !pts.is_empty() {
        label(&mut s, W / 2.0, H - M + 30.0, "middle", &format!("energy [J], {elo:.2e} to {ehi:.2e}"));
        label(&mut s, M - 4.0, M + 20.0, "end", &format!("{ahi:.3}"));
        label(&mut s, M - 4.0, H - M - 20.0, "end", &format!("{alo:.3}"));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device(l: f64, f1: f64, e: f64, a: f64) -> DeviceRecord {
        DeviceRecord {
            natural_freqs_hz: vec![f1, 6.0 * f1],
            frf_peak_hz: Some(f1),
            frf_freqs_hz: vec![0.0, f1, 2.0 * f1],
            frf_magnitude: vec![0.1, 2.0, 0.3],
            energy_j: vec![e, 1.1 * e],
            energy_mean_j: Some(1.05 * e),
            energy_std_j: Some(0.07 * e),
            accuracy_mean: Some(a),
            accuracy_std: Some(0.01),
            ..DeviceRecord::new(l)
        }
    }

    fn sample() -> SweepReport {
        let mut failed = DeviceRecord::new(0.4);
        failed.status = DeviceStatus::Failed { reason: "singular".into() };
        SweepReport::assemble(
            vec![device(0.1, 80.0, 1e-9, 0.9), device(0.15, 21.0, 3e-7, 0.88), device(0.2, 12.0, 2e-8, 0.92), failed],
            300,
            298,
            0.51,
            Some(21.0),
            2,
            5,
        )
    }

    #[test]
    fn summary_fields() {
        let r = sample();
        assert_eq!(r.energy_argmax_length_m, Some(0.15));
        assert_eq!(r.accuracy_argmax_length_m, Some(0.2));
        assert_eq!(r.optima_coincide, Some(false));
        assert_eq!(r.nearest_f1_length_m, Some(0.15));
        assert_eq!(r.energy_optimum_matches_excitation, Some(true));
        assert_eq!(r.events_dropped, 2);
        assert!(r.any_failed);
        assert!(r.table().contains("failed: singular"));
    }

    #[test]
    fn emitted_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        emit_report(&r, dir.path()).unwrap();
        let back: SweepReport = crate::io::read_json(&dir.path().join("report.json")).unwrap();
        assert_eq!(back, r);
        let svg = std::fs::read_to_string(dir.path().join("energy_vs_accuracy.svg")).unwrap();
        assert_eq!(svg.matches("class=\"device\"").count(), 3);
        for f in ["frf_overlay.svg", "energy_bars.svg", "accuracy_bars.svg", "report.txt", "frf/L150mm.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
