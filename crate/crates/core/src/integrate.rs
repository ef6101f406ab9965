//! Time-domain voltage simulation of the reduced model under base acceleration.
//!
//! Two routes are provided. [`Integrator::DormandPrince`] is an adaptive
//! 5(4) Runge-Kutta pair stepping through each input sample interval;
//! [`Integrator::ExactHold`] propagates the linear system exactly for an
//! input that is linear between samples, using one matrix exponential per
//! sample rate. Both see the same piecewise-linear acceleration.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::modal::ReducedModel;
use crate::response::{require_quantity, state_matrix};
use crate::series::{Quantity, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    DormandPrince,
    ExactHold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOpts {
    pub method: Integrator,
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step accepted before giving up, s.
    pub min_step: f64,
    /// Initial state `[η; η̇; v]`; zero when absent.
    pub initial_state: Option<Vec<f64>>,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self { method: Integrator::DormandPrince, rtol: 1e-6, atol: 1e-9, min_step: 1e-12, initial_state: None }
    }
}

impl SolverOpts {
    pub fn exact() -> Self {
        Self { method: Integrator::ExactHold, ..Self::default() }
    }
}

// Dormand-Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b̂, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand-Prince integrator for `y' = f(t, y)`.
///
/// The right-hand side is passed per call so that a piecewise-defined
/// forcing can change between calls while the step size and the
/// first-same-as-last stage carry over.
pub struct DormandPrince {
    rtol: f64,
    atol: f64,
    min_step: f64,
    h: Option<f64>,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y_new: Vec<f64>,
    fsal_valid: bool,
    steps: usize,
}

impl DormandPrince {
    pub fn new(dim: usize, rtol: f64, atol: f64, min_step: f64) -> Self {
        Self {
            rtol,
            atol,
            min_step,
            h: None,
            k: core::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            fsal_valid: false,
            steps: 0,
        }
    }

    /// Accepted steps so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn error_norm(&self, y: &[f64]) -> f64 {
        let n = y.len();
        let mut acc = 0.0;
        for i in 0..n {
            let e = E1 * self.k[0][i]
                + E3 * self.k[2][i]
                + E4 * self.k[3][i]
                + E5 * self.k[4][i]
                + E6 * self.k[5][i]
                + E7 * self.k[6][i];
            let scale = self.atol + self.rtol * y[i].abs().max(self.y_new[i].abs());
            acc += (e / scale) * (e / scale);
        }
        libm::sqrt(acc / n as f64)
    }

    fn initial_step<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, rhs: &mut F, t: f64, y: &[f64], span: f64) -> f64 {
        let n = y.len();
        rhs(t, y, &mut self.k[0]);
        let sc = |i: usize| self.atol + self.rtol * y[i].abs();
        let d0 = libm::sqrt((0..n).map(|i| (y[i] / sc(i)).powi(2)).sum::<f64>() / n as f64);
        let d1 = libm::sqrt((0..n).map(|i| (self.k[0][i] / sc(i)).powi(2)).sum::<f64>() / n as f64);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(span)
    }

    /// Advance `y` from `t0` to exactly `t1`.
    pub fn advance<F: FnMut(f64, &[f64], &mut [f64])>(
        &mut self,
        rhs: &mut F,
        t0: f64,
        t1: f64,
        y: &mut [f64],
    ) -> Result<()> {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let mut h = match self.h {
            Some(h) => h,
            None => {
                let h = self.initial_step(rhs, t0, y, span);
                self.fsal_valid = true;
                h
            }
        };
        let mut t = t0;
        let n = y.len();
        while t < t1 {
            let last = t + h >= t1 - 1e-12 * span;
            let h_step = if last { t1 - t } else { h };
            if !self.fsal_valid {
                rhs(t, y, &mut self.k[0]);
                self.fsal_valid = true;
            }
            self.stage_eval(rhs, t, y, h_step, n);
            let err = self.error_norm(y);
            if err <= 1.0 {
                t = if last { t1 } else { t + h_step };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.steps += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0) };
                // keep the proposal from the full step when the last one was clipped
                h = if last { h.max(h_step * fac).min(h * 5.0) } else { h_step * fac };
            } else {
                let fac = (0.9 * libm::pow(err, -0.2)).clamp(0.1, 1.0);
                h = h_step * fac;
                if h < self.min_step {
                    return Err(Error::StepUnderflow { time: t, step: h });
                }
            }
        }
        self.h = Some(h);
        Ok(())
    }

    fn stage_eval<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, rhs: &mut F, t: f64, y: &[f64], h: f64, n: usize) {
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let s = &mut self.stage;
        for i in 0..n {
            s[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, s, k2);
        for i in 0..n {
            s[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, s, k3);
        for i in 0..n {
            s[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, s, k4);
        for i in 0..n {
            s[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, s, k5);
        for i in 0..n {
            s[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + h, s, k6);
        for i in 0..n {
            self.y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        rhs(t + h, &self.y_new, k7);
    }
}

/// Right-hand side of the coupled equations with a given base acceleration.
fn coupled_rhs(model: &ReducedModel, z: &[f64], accel: f64, dz: &mut [f64]) {
    let k = model.num_modes();
    let (eta, rest) = z.split_at(k);
    let (eta_dot, v) = rest.split_at(k);
    let v = v[0];
    let mut current = 0.0;
    for i in 0..k {
        dz[i] = eta_dot[i];
        let mut acc = model.theta_o[i] * v + model.f_o[i] * accel;
        for j in 0..k {
            acc -= model.k_o[(i, j)] * eta[j] + model.c_o[(i, j)] * eta_dot[j];
        }
        dz[k + i] = acc;
        current += model.theta_phi[i] * eta_dot[i];
    }
    dz[2 * k] = -(current + v / model.load_resistance) / model.capacitance;
}

fn initial_state(model: &ReducedModel, opts: &SolverOpts) -> Result<Vec<f64>> {
    let n = 2 * model.num_modes() + 1;
    match &opts.initial_state {
        None => Ok(vec![0.0; n]),
        Some(z) if z.len() == n && z.iter().all(|v| v.is_finite()) => Ok(z.clone()),
        Some(z) => Err(invalid(
            "initial_state",
            alloc::format!("expected {n} finite entries, got {}", z.len()),
        )),
    }
}

/// Voltage across the load for a sampled base acceleration, reported on
/// the acceleration's time grid.
pub fn simulate_voltage(model: &ReducedModel, accel: &TimeSeries, opts: &SolverOpts) -> Result<TimeSeries> {
    model.validate()?;
    require_quantity(accel, Quantity::Acceleration)?;
    let z0 = initial_state(model, opts)?;
    let values = match opts.method {
        Integrator::DormandPrince => simulate_rk(model, accel, opts, z0)?,
        Integrator::ExactHold => {
            let mut lti = ExactHold::new(model, accel.sample_rate)?;
            lti.set_state(&z0);
            lti.run(&accel.values)
        }
    };
    Ok(TimeSeries {
        quantity: Quantity::Voltage,
        start_time: accel.start_time,
        sample_rate: accel.sample_rate,
        values,
    })
}

fn simulate_rk(model: &ReducedModel, accel: &TimeSeries, opts: &SolverOpts, mut z: Vec<f64>) -> Result<Vec<f64>> {
    let k = model.num_modes();
    let n = accel.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    out.push(z[2 * k]);
    let dt = accel.dt();
    let t_start = accel.start_time;
    let samples = &accel.values;
    let mut solver = DormandPrince::new(z.len(), opts.rtol, opts.atol, opts.min_step);
    for i in 0..n - 1 {
        // local time from the left sample keeps the input interpolation exact
        let (a0, a1) = (samples[i], samples[i + 1]);
        let slope = (a1 - a0) / dt;
        let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| coupled_rhs(model, y, a0 + slope * t, dy);
        solver.advance(&mut rhs, 0.0, dt, &mut z).map_err(|e| match e {
            Error::StepUnderflow { time, step } => {
                Error::StepUnderflow { time: t_start + i as f64 * dt + time, step }
            }
            other => other,
        })?;
        out.push(z[2 * k]);
    }
    Ok(out)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé(8) approximant.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let norm = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { libm::ceil(libm::log2(norm / 0.5)) as i32 } else { 0 };
    let scaled = a / libm::pow(2.0, squarings as f64);
    const Q: usize = 8;
    let mut c = 1.0;
    let mut x = DMatrix::<f64>::identity(n, n);
    let mut num = DMatrix::<f64>::identity(n, n);
    let mut den = DMatrix::<f64>::identity(n, n);
    for k in 1..=Q {
        c *= (Q - k + 1) as f64 / (k * (2 * Q - k + 1)) as f64;
        x = &scaled * &x;
        num += &x * c;
        if k % 2 == 0 {
            den += &x * c;
        } else {
            den -= &x * c;
        }
    }
    let mut e = den
        .lu()
        .solve(&num)
        .ok_or(Error::Assembly { dimension: "state", reason: alloc::format!("singular Padé denominator, n = {n}") })?;
    for _ in 0..squarings {
        e = &e * &e;
    }
    Ok(e)
}

/// Exact propagator of the coupled linear system for an input that is
/// linear between samples (first-order hold).
///
/// `Z[n+1] = Φ Z[n] + g0 u[n] + g1 u[n+1]` with `Φ = exp(A h)`; the input
/// weights come from the exponential of the augmented matrix
/// `[[A h, b h, 0], [0, 0, 1], [0, 0, 0]]`.
#[derive(Debug, Clone)]
pub struct ExactHold {
    n: usize,
    k: usize,
    phi: Vec<f64>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    z: Vec<f64>,
    scratch: Vec<f64>,
}

impl ExactHold {
    pub fn new(model: &ReducedModel, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(invalid("sample_rate", "must be positive"));
        }
        model.validate()?;
        let (a, b) = state_matrix(model);
        let n = a.nrows();
        let h = 1.0 / sample_rate;
        let mut aug = DMatrix::<f64>::zeros(n + 2, n + 2);
        aug.view_mut((0, 0), (n, n)).copy_from(&(a * h));
        for i in 0..n {
            aug[(i, n)] = b[i] * h;
        }
        aug[(n, n + 1)] = 1.0;
        let e = expm(&aug)?;
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "state transition", index: 0 });
        }
        let mut phi = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                phi.push(e[(i, j)]);
            }
        }
        let gamma1: Vec<f64> = (0..n).map(|i| e[(i, n)]).collect();
        let gamma2: Vec<f64> = (0..n).map(|i| e[(i, n + 1)]).collect();
        let g0 = gamma1.iter().zip(&gamma2).map(|(a, b)| a - b).collect();
        Ok(Self {
            n,
            k: model.num_modes(),
            phi,
            g0,
            g1: gamma2,
            z: vec![0.0; n],
            scratch: vec![0.0; n],
        })
    }

    pub fn set_state(&mut self, z: &[f64]) {
        self.z.copy_from_slice(z);
    }

    pub fn state(&self) -> &[f64] {
        &self.z
    }

    pub fn voltage(&self) -> f64 {
        self.z[2 * self.k]
    }

    /// One sample interval with input going from `u0` to `u1`; returns the new voltage.
    pub fn step(&mut self, u0: f64, u1: f64) -> f64 {
        let n = self.n;
        for i in 0..n {
            let row = &self.phi[i * n..(i + 1) * n];
            let mut acc = self.g0[i] * u0 + self.g1[i] * u1;
            for (p, z) in row.iter().zip(&self.z) {
                acc += p * z;
            }
            self.scratch[i] = acc;
        }
        core::mem::swap(&mut self.z, &mut self.scratch);
        self.voltage()
    }

    /// Voltage at every input sample, starting from the current state.
    pub fn run(&mut self, input: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(input.len());
        if input.is_empty() {
            return out;
        }
        out.push(self.voltage());
        for w in input.windows(2) {
            out.push(self.step(w[0], w[1]));
        }
        out
    }
}
