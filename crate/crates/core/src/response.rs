//! Frequency response, state-space form and harvested energy of the reduced
//! electro-mechanical model.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::modal::ReducedModel;
use crate::series::{Quantity, TimeSeries};

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Voltage per unit base acceleration, V/(m/s²), on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrfCurve {
    pub freqs_hz: Vec<f64>,
    pub response: Vec<Complex64>,
}

impl FrfCurve {
    pub fn magnitude(&self) -> Vec<f64> {
        self.response.iter().map(|h| h.norm()).collect()
    }

    /// Frequencies of the local maxima of |H|, ascending.
    pub fn peaks_hz(&self) -> Vec<f64> {
        let mag = self.magnitude();
        (1..mag.len().saturating_sub(1))
            .filter(|&i| mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])
            .map(|i| self.freqs_hz[i])
            .collect()
    }
}

/// `χ(ω) = (1/R_l + iωC_p)⁻¹`, the load impedance in parallel with the piezo capacitance.
fn load_impedance(model: &ReducedModel, omega: f64) -> Complex64 {
    Complex64::new(1.0 / model.load_resistance, omega * model.capacitance).inv()
}

/// Voltage FRF at a single angular frequency.
///
/// `H = iωχ ΘᵀΦ (−ω²I + iω c_o + k_o + iωχ θ_o ΘᵀΦ)⁻¹ f_o`
pub fn frf_at(model: &ReducedModel, omega: f64) -> Result<Complex64> {
    if omega == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let k = model.num_modes();
    let i = Complex64::i();
    let chi = load_impedance(model, omega);
    let coupled = i * omega * chi;
    let mut a = DMatrix::<Complex64>::zeros(k, k);
    for r in 0..k {
        for c in 0..k {
            a[(r, c)] = Complex64::new(model.k_o[(r, c)], omega * model.c_o[(r, c)])
                + coupled * model.theta_o[r] * model.theta_phi[c];
        }
        a[(r, r)] -= omega * omega;
    }
    let rhs = DVector::<Complex64>::from_iterator(k, model.f_o.iter().map(|f| Complex64::new(*f, 0.0)));
    let singular = || Error::SingularFrequency { frequency_hz: omega / TWO_PI };
    let lu = a.lu();
    if !lu.is_invertible() {
        return Err(singular());
    }
    let x = lu.solve(&rhs).ok_or_else(singular)?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(singular());
    }
    let proj: Complex64 = model.theta_phi.iter().zip(x.iter()).map(|(t, x)| *x * *t).sum();
    Ok(coupled * proj)
}

/// Voltage FRF on a grid of non-negative frequencies in Hz.
pub fn frf_voltage(model: &ReducedModel, freqs_hz: &[f64]) -> Result<FrfCurve> {
    model.validate()?;
    if let Some(f) = freqs_hz.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
        return Err(invalid("freqs_hz", alloc::format!("frequencies must be non-negative, got {f}")));
    }
    let response = freqs_hz
        .iter()
        .map(|f| frf_at(model, TWO_PI * f))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrfCurve { freqs_hz: freqs_hz.to_vec(), response })
}

/// State matrix `A` and input vector `b` for `Z = [η; η̇; v]`.
pub fn state_matrix(model: &ReducedModel) -> (DMatrix<f64>, DVector<f64>) {
    let k = model.num_modes();
    let n = 2 * k + 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..k {
        a[(i, k + i)] = 1.0;
        for j in 0..k {
            a[(k + i, j)] = -model.k_o[(i, j)];
            a[(k + i, k + j)] = -model.c_o[(i, j)];
        }
        a[(k + i, 2 * k)] = model.theta_o[i];
        a[(2 * k, k + i)] = -model.theta_phi[i] / model.capacitance;
        b[k + i] = model.f_o[i];
    }
    a[(2 * k, 2 * k)] = -1.0 / (model.capacitance * model.load_resistance);
    (a, b)
}

/// Eigenvalues of the state matrix.
pub fn state_eigenvalues(model: &ReducedModel) -> Vec<Complex64> {
    let (a, _) = state_matrix(model);
    a.complex_eigenvalues().iter().cloned().collect()
}

/// Harvested energy `∫ v²/R_l dt` over `[t1, t2]`, in joules.
///
/// The instantaneous power is integrated with the trapezoidal rule on the
/// sample grid; window ends falling between samples use the linear
/// interpolant of the power, so adjacent windows add up.
pub fn harvested_energy(v: &TimeSeries, load_resistance: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(load_resistance > 0.0) {
        return Err(invalid("load_resistance", "must be positive"));
    }
    if !(t1 < t2) {
        return Err(invalid("window", alloc::format!("need t1 < t2, got [{t1}, {t2}]")));
    }
    if v.len() < 2 {
        return Err(invalid("voltage", "need at least two samples"));
    }
    let dt = v.dt();
    let (s0, s1) = (v.start_time, v.end_time());
    let slack = 1e-9 * dt;
    if t1 < s0 - slack || t2 > s1 + slack {
        return Err(Error::WindowOutOfRange { start: t1, end: t2, series_start: s0, series_end: s1 });
    }
    let power = |i: usize| v.values[i] * v.values[i] / load_resistance;
    let last = v.len() - 1;
    // fractional sample positions of the window ends
    let u1 = ((t1 - s0) / dt).clamp(0.0, last as f64);
    let u2 = ((t2 - s0) / dt).clamp(0.0, last as f64);
    let interp = |u: f64| {
        let i = (libm::floor(u) as usize).min(last - 1);
        let frac = u - i as f64;
        power(i) * (1.0 - frac) + power(i + 1) * frac
    };
    let i1 = libm::ceil(u1) as usize;
    let i2 = libm::floor(u2) as usize;
    if i1 > i2 {
        // both ends inside one sample interval
        return Ok(0.5 * (interp(u1) + interp(u2)) * (u2 - u1) * dt);
    }
    let mut e = 0.5 * (interp(u1) + power(i1)) * (i1 as f64 - u1) * dt;
    for i in i1..i2 {
        e += 0.5 * (power(i) + power(i + 1)) * dt;
    }
    e += 0.5 * (power(i2) + interp(u2)) * (u2 - i2 as f64) * dt;
    Ok(e)
}

/// Running trapezoidal energy over a stream of voltage samples on a fixed grid.
#[derive(Debug, Clone)]
pub struct EnergyAccumulator {
    dt: f64,
    load_resistance: f64,
    last_power: Option<f64>,
    energy: f64,
}

impl EnergyAccumulator {
    pub fn new(sample_rate: f64, load_resistance: f64) -> Self {
        Self { dt: 1.0 / sample_rate, load_resistance, last_power: None, energy: 0.0 }
    }

    pub fn push(&mut self, v: f64) {
        let p = v * v / self.load_resistance;
        if let Some(prev) = self.last_power {
            self.energy += 0.5 * (prev + p) * self.dt;
        }
        self.last_power = Some(p);
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }
}

/// Rejects a series of the wrong quantity or with non-finite samples.
pub(crate) fn require_quantity(ts: &TimeSeries, q: Quantity) -> Result<()> {
    if ts.quantity != q {
        return Err(invalid(
            "series",
            alloc::format!("expected {} samples, got {}", q.name(), ts.quantity.name()),
        ));
    }
    ts.validate()
}
