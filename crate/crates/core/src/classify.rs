//! Band/segment scalogram features and a multinomial logistic baseline
//! classifier with a repeated random-split evaluation protocol.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{Scalogram, SpeedClass};
use crate::synth::derive_seed;

/// Layout of the feature grid over a scalogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub f_lo: f64,
    pub f_hi: f64,
    pub bands: usize,
    /// Segment range in seconds from the first scalogram sample.
    pub t0: f64,
    pub t1: f64,
    pub segments: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self { f_lo: 1.0, f_hi: 200.0, bands: 8, t0: 5.0, t1: 25.0, segments: 10 }
    }
}

impl FeatureSpec {
    pub fn len(&self) -> usize {
        self.bands * self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Log-spaced band edges, `bands + 1` values.
    pub fn band_edges(&self) -> Vec<f64> {
        let ratio = self.f_hi / self.f_lo;
        (0..=self.bands).map(|b| self.f_lo * libm::pow(ratio, b as f64 / self.bands as f64)).collect()
    }

    fn band_of(&self, edges: &[f64], f: f64) -> Option<usize> {
        if f < self.f_lo || f > self.f_hi {
            return None;
        }
        Some((edges.partition_point(|e| *e <= f).saturating_sub(1)).min(self.bands - 1))
    }

    fn segment_of(&self, t: f64) -> Option<usize> {
        if t < self.t0 || t > self.t1 {
            return None;
        }
        let seg = libm::floor((t - self.t0) / (self.t1 - self.t0) * self.segments as f64) as usize;
        Some(seg.min(self.segments - 1))
    }
}

/// Mean |W|² over each (band, segment) cell, band-major.
pub fn extract_features(sc: &Scalogram, spec: &FeatureSpec) -> Result<Vec<f64>> {
    if spec.bands == 0 || spec.segments == 0 || !(spec.f_hi > spec.f_lo) || !(spec.t1 > spec.t0) || !(spec.f_lo > 0.0) {
        return Err(invalid("feature_spec", "degenerate band or segment layout"));
    }
    let edges = spec.band_edges();
    let origin = sc.times_s.first().copied().unwrap_or(0.0);
    let seg_of: Vec<Option<usize>> = sc.times_s.iter().map(|t| spec.segment_of(t - origin)).collect();
    let mut sums = vec![0.0; spec.len()];
    let mut counts = vec![0usize; spec.len()];
    for (fi, &f) in sc.freqs_hz.iter().enumerate() {
        let Some(b) = spec.band_of(&edges, f) else { continue };
        for (v, seg) in sc.row(fi).iter().zip(&seg_of) {
            if let Some(s) = seg {
                sums[b * spec.segments + s] += v * v;
                counts[b * spec.segments + s] += 1;
            }
        }
    }
    if let Some(cell) = counts.iter().position(|c| *c == 0) {
        return Err(Error::Coverage {
            what: alloc::format!(
                "feature cell (band {}, segment {}) has no scalogram samples",
                cell / spec.segments,
                cell % spec.segments
            ),
        });
    }
    Ok(sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect())
}

/// Elementwise map applied to raw features before standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureTransform {
    #[default]
    Identity,
    /// Natural log, with zero mapped to the log of the smallest positive double.
    Log,
}

impl FeatureTransform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            FeatureTransform::Identity => x,
            FeatureTransform::Log => libm::log(x.max(f64::MIN_POSITIVE)),
        }
    }
}

/// Per-feature mean and standard deviation from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        // constant features stay unscaled
        let scale = var.into_iter().map(|v| if v > 0.0 { libm::sqrt(v) } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOpts {
    pub l2: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub transform: FeatureTransform,
}

impl Default for TrainOpts {
    fn default() -> Self {
        Self { l2: 1e-3, max_iter: 5000, grad_tol: 1e-6, transform: FeatureTransform::Identity }
    }
}

/// Softmax regression over standardized features. `weights[c]` holds the
/// bias followed by one coefficient per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub n_classes: usize,
    pub transform: FeatureTransform,
    pub standardizer: Standardizer,
    pub weights: Vec<Vec<f64>>,
    pub iterations: usize,
    pub final_grad_norm: f64,
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = libm::exp(*v - m);
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

fn scores(weights: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    weights.iter().map(|w| w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).collect()
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` (biases unpenalized) and its gradient.
pub fn loss_and_grad(weights: &[Vec<f64>], x: &[Vec<f64>], y: &[usize], l2: f64) -> (f64, Vec<Vec<f64>>) {
    let n = x.len() as f64;
    let mut grad: Vec<Vec<f64>> = weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let mut p = scores(weights, xi);
        softmax_in_place(&mut p);
        loss -= libm::log(p[yi].max(f64::MIN_POSITIVE)) / n;
        for (c, g) in grad.iter_mut().enumerate() {
            let r = (p[c] - if c == yi { 1.0 } else { 0.0 }) / n;
            g[0] += r;
            for (gj, xj) in g[1..].iter_mut().zip(xi) {
                *gj += r * xj;
            }
        }
    }
    for (w, g) in weights.iter().zip(grad.iter_mut()) {
        for j in 1..w.len() {
            loss += 0.5 * l2 * w[j] * w[j];
            g[j] += l2 * w[j];
        }
    }
    (loss, grad)
}

/// Largest eigenvalue of `AᵀA / n` for `A = [1 | X]`, by power iteration.
fn gram_spectral_radius(x: &[Vec<f64>]) -> f64 {
    let d = x.first().map_or(0, |r| r.len()) + 1;
    let n = x.len().max(1) as f64;
    let mut v = vec![1.0 / libm::sqrt(d as f64); d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut w = vec![0.0; d];
        for xi in x {
            let dot = v[0] + xi.iter().zip(&v[1..]).map(|(a, b)| a * b).sum::<f64>();
            w[0] += dot / n;
            for (wj, xj) in w[1..].iter_mut().zip(xi) {
                *wj += dot * xj / n;
            }
        }
        let norm = libm::sqrt(w.iter().map(|a| a * a).sum::<f64>());
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.into_iter().map(|a| a / norm).collect();
        if (next - lambda).abs() <= 1e-10 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Fit the softmax classifier by full-batch gradient descent with step `1/L`.
pub fn train_baseline(features: &[Vec<f64>], labels: &[usize], n_classes: usize, opts: &TrainOpts) -> Result<BaselineModel> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(invalid("features", "need one label per non-empty feature row"));
    }
    let d = features[0].len();
    if features.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
        return Err(invalid("features", "rows must share a length and be finite"));
    }
    if labels.iter().any(|l| *l >= n_classes) {
        return Err(invalid("labels", "label index out of range"));
    }
    let mut present = vec![false; n_classes];
    labels.iter().for_each(|l| present[*l] = true);
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(Error::SingleClass);
    }
    let transformed: Vec<Vec<f64>> =
        features.iter().map(|r| r.iter().map(|v| opts.transform.apply(*v)).collect()).collect();
    let standardizer = Standardizer::fit(&transformed);
    let x: Vec<Vec<f64>> = transformed.iter().map(|r| standardizer.apply(r)).collect();
    let lipschitz = 0.5 * gram_spectral_radius(&x) + opts.l2;
    let step = 1.0 / lipschitz.max(1e-12);
    let mut weights = vec![vec![0.0; d + 1]; n_classes];
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    while iterations < opts.max_iter {
        let (_, grad) = loss_and_grad(&weights, &x, labels, opts.l2);
        grad_norm = libm::sqrt(grad.iter().flatten().map(|g| g * g).sum::<f64>());
        if grad_norm < opts.grad_tol {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            for (wj, gj) in w.iter_mut().zip(g) {
                *wj -= step * gj;
            }
        }
        iterations += 1;
    }
    Ok(BaselineModel {
        n_classes,
        transform: opts.transform,
        standardizer,
        weights,
        iterations,
        final_grad_norm: grad_norm,
    })
}

/// Anything that assigns a class index to a raw feature vector.
pub trait Classifier {
    fn predict(&self, x: &[f64]) -> usize;
}

impl BaselineModel {
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let t: Vec<f64> = x.iter().map(|v| self.transform.apply(*v)).collect();
        let mut p = scores(&self.weights, &self.standardizer.apply(&t));
        softmax_in_place(&mut p);
        p
    }
}

impl Classifier for BaselineModel {
    fn predict(&self, x: &[f64]) -> usize {
        let p = self.predict_proba(x);
        (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b })
    }
}

/// Builds a classifier from training rows.
pub trait Trainer {
    type Model: Classifier;
    fn train(&self, features: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Self::Model>;
}

impl Trainer for TrainOpts {
    type Model = BaselineModel;

    fn train(&self, features: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<BaselineModel> {
        train_baseline(features, labels, n_classes, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Protocol {
    pub runs: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub max_resamples: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self { runs: 5, train_fraction: 0.7, seed: 0, max_resamples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub accuracy: f64,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    pub train_size: usize,
    pub validation_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub classes: Vec<String>,
    pub runs: Vec<RunResult>,
    pub accuracy_mean: f64,
    /// Sample standard deviation over runs.
    pub accuracy_std: f64,
    /// Confusion matrix of the last run.
    pub confusion: Vec<Vec<usize>>,
}

pub fn class_names() -> Vec<String> {
    SpeedClass::LABELED.iter().map(|c| String::from(c.name())).collect()
}

/// Confusion matrix and accuracy of `model` on the given rows.
pub fn score(model: &impl Classifier, features: &[Vec<f64>], labels: &[usize], n_classes: usize) -> (f64, Vec<Vec<usize>>) {
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (x, &y) in features.iter().zip(labels) {
        confusion[y][model.predict(x).min(n_classes - 1)] += 1;
    }
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    (correct as f64 / labels.len().max(1) as f64, confusion)
}

/// Random train/validation split in which every present class appears on both sides.
pub fn split_indices(labels: &[usize], n_classes: usize, train_fraction: f64, seed: u64, max_resamples: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    let n_train = libm::round(train_fraction * n as f64) as usize;
    if n_train == 0 || n_train >= n {
        return Err(invalid("train_fraction", "split leaves one side empty"));
    }
    let mut present = vec![false; n_classes];
    labels.iter().for_each(|l| present[*l] = true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..max_resamples.max(1) {
        idx.shuffle(&mut rng);
        let (train, val) = idx.split_at(n_train);
        let covers = |part: &[usize]| {
            let mut seen = vec![false; n_classes];
            part.iter().for_each(|i| seen[labels[*i]] = true);
            seen == present
        };
        if covers(train) && covers(val) {
            return Ok((train.to_vec(), val.to_vec()));
        }
    }
    Err(Error::Coverage { what: alloc::format!("no split with every class on both sides after {max_resamples} draws") })
}

/// Repeated random-split evaluation: train on each split and score the held-out part.
pub fn evaluate<T: Trainer>(trainer: &T, features: &[Vec<f64>], labels: &[usize], protocol: &Protocol) -> Result<Metrics> {
    let n_classes = SpeedClass::LABELED.len();
    if features.len() != labels.len() {
        return Err(invalid("features", "need one label per feature row"));
    }
    if protocol.runs == 0 {
        return Err(invalid("runs", "need at least one run"));
    }
    let mut present = vec![false; n_classes];
    labels.iter().for_each(|l| present[(*l).min(n_classes - 1)] = true);
    if present.iter().any(|p| !p) {
        return Err(Error::Coverage { what: String::from("dataset lacks a speed class") });
    }
    let mut runs = Vec::with_capacity(protocol.runs);
    for r in 0..protocol.runs {
        let seed = derive_seed(protocol.seed, r as u64);
        let (train, val) = split_indices(labels, n_classes, protocol.train_fraction, seed, protocol.max_resamples)?;
        let pick = |ix: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
            (ix.iter().map(|i| features[*i].clone()).collect(), ix.iter().map(|i| labels[*i]).collect())
        };
        let (xt, yt) = pick(&train);
        let (xv, yv) = pick(&val);
        let model = trainer.train(&xt, &yt, n_classes)?;
        let (accuracy, confusion) = score(&model, &xv, &yv, n_classes);
        runs.push(RunResult { accuracy, confusion, train_size: xt.len(), validation_size: xv.len() });
    }
    let k = runs.len() as f64;
    let accuracy_mean = runs.iter().map(|r| r.accuracy).sum::<f64>() / k;
    let accuracy_std = if runs.len() > 1 {
        libm::sqrt(runs.iter().map(|r| (r.accuracy - accuracy_mean).powi(2)).sum::<f64>() / (k - 1.0))
    } else {
        0.0
    };
    let confusion = runs.last().unwrap().confusion.clone();
    Ok(Metrics { classes: class_names(), runs, accuracy_mean, accuracy_std, confusion })
}

/// Predicts the most frequent training class for every input.
#[derive(Debug, Clone, Copy, Default)]
pub struct MajorityTrainer;

pub struct MajorityModel(pub usize);

impl Classifier for MajorityModel {
    fn predict(&self, _x: &[f64]) -> usize {
        self.0
    }
}

impl Trainer for MajorityTrainer {
    type Model = MajorityModel;

    fn train(&self, _features: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<MajorityModel> {
        let mut counts = vec![0usize; n_classes];
        labels.iter().for_each(|l| counts[*l] += 1);
        Ok(MajorityModel((0..n_classes).fold(0, |b, c| if counts[c] > counts[b] { c } else { b })))
    }
}
