//! Mass-normalized modal reduction of the plate operators.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{DeviceConfig, ModeCount};
use crate::error::{invalid, Error, Result};
use crate::plate::{assemble_plate, DiscreteOperators};

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Upper analysis frequency of the classifier images, Hz.
pub const ANALYSIS_BAND_HZ: f64 = 200.0;

/// Reduced electro-mechanical model.
///
/// `eta'' + c_o eta' + k_o eta - theta_o v = f_o a_b` and
/// `C_p v' + v / R_l + ThetaPhi eta' = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelRecord", try_from = "ModelRecord")]
pub struct ReducedModel {
    /// ω_i in rad/s, ascending.
    pub natural_freqs_rad: Vec<f64>,
    /// N×K, columns mass-normalized. May be empty when loaded from a compact artifact.
    pub mode_shapes: DMatrix<f64>,
    pub k_o: DMatrix<f64>,
    pub c_o: DMatrix<f64>,
    pub theta_o: DVector<f64>,
    /// Row vector Θᵀ·Φ, stored as a K-vector.
    pub theta_phi: DVector<f64>,
    pub f_o: DVector<f64>,
    pub capacitance: f64,
    pub load_resistance: f64,
}

impl ReducedModel {
    pub fn num_modes(&self) -> usize {
        self.natural_freqs_rad.len()
    }

    pub fn natural_freqs_hz(&self) -> Vec<f64> {
        self.natural_freqs_rad.iter().map(|w| w / TWO_PI).collect()
    }

    /// Modal damping ratio of mode `i` from the diagonal of `c_o`.
    pub fn damping_ratio(&self, i: usize) -> f64 {
        self.c_o[(i, i)] / (2.0 * self.natural_freqs_rad[i])
    }

    /// Same model with the mode shapes dropped, for compact artifacts.
    pub fn without_shapes(&self) -> Self {
        let mut m = self.clone();
        m.mode_shapes = DMatrix::zeros(0, self.num_modes());
        m
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_modes();
        if k == 0 {
            return Err(invalid("model", "no modes"));
        }
        let square = |m: &DMatrix<f64>| m.nrows() == k && m.ncols() == k;
        if !square(&self.k_o) || !square(&self.c_o) {
            return Err(invalid("model", "k_o and c_o must be K×K"));
        }
        if self.theta_o.len() != k || self.theta_phi.len() != k || self.f_o.len() != k {
            return Err(invalid("model", "coupling and load vectors must have length K"));
        }
        if !(self.capacitance > 0.0 && self.load_resistance > 0.0) {
            return Err(invalid("model", "capacitance and load resistance must be positive"));
        }
        if self.natural_freqs_rad.windows(2).any(|w| w[1] < w[0])
            || self.natural_freqs_rad.iter().any(|w| !(*w > 0.0))
        {
            return Err(invalid("model", "natural frequencies must be positive and ascending"));
        }
        Ok(())
    }
}

/// Plain row-major form of [`ReducedModel`] used for serialization.
#[derive(Serialize, Deserialize)]
struct ModelRecord {
    natural_freqs_rad: Vec<f64>,
    mode_shapes: Vec<Vec<f64>>,
    k_o: Vec<Vec<f64>>,
    c_o: Vec<Vec<f64>>,
    theta_o: Vec<f64>,
    theta_phi: Vec<f64>,
    f_o: Vec<f64>,
    capacitance: f64,
    load_resistance: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize, what: &'static str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(invalid(what, "ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

impl From<ReducedModel> for ModelRecord {
    fn from(m: ReducedModel) -> Self {
        Self {
            mode_shapes: rows(&m.mode_shapes),
            k_o: rows(&m.k_o),
            c_o: rows(&m.c_o),
            theta_o: m.theta_o.iter().cloned().collect(),
            theta_phi: m.theta_phi.iter().cloned().collect(),
            f_o: m.f_o.iter().cloned().collect(),
            natural_freqs_rad: m.natural_freqs_rad,
            capacitance: m.capacitance,
            load_resistance: m.load_resistance,
        }
    }
}

impl TryFrom<ModelRecord> for ReducedModel {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        let k = r.natural_freqs_rad.len();
        let model = Self {
            mode_shapes: from_rows(&r.mode_shapes, k, "mode_shapes")?,
            k_o: from_rows(&r.k_o, k, "k_o")?,
            c_o: from_rows(&r.c_o, k, "c_o")?,
            theta_o: DVector::from_vec(r.theta_o),
            theta_phi: DVector::from_vec(r.theta_phi),
            f_o: DVector::from_vec(r.f_o),
            natural_freqs_rad: r.natural_freqs_rad,
            capacitance: r.capacitance,
            load_resistance: r.load_resistance,
        };
        model.validate()?;
        Ok(model)
    }
}

/// All generalized eigenpairs of `K φ = ω² M φ`, ascending, mass-normalized.
pub fn generalized_eigen(
    stiffness: &DMatrix<f64>,
    mass: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    const MAX_ITER: usize = 10_000;
    let n = mass.nrows();
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("mass", "matrix is not positive definite"))?;
    let l = chol.l();
    // C = L⁻¹ K L⁻ᵀ
    let linv_k = l
        .solve_lower_triangular(stiffness)
        .ok_or_else(|| invalid("mass", "singular Cholesky factor"))?;
    let c = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| invalid("mass", "singular Cholesky factor"))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c
        .try_symmetric_eigen(f64::EPSILON, MAX_ITER)
        .ok_or(Error::EigenNonConvergence { iterations: MAX_ITER, dofs: n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let mut phi = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| invalid("mass", "singular Cholesky factor"))?;
    // sign convention: the largest-magnitude entry of each shape is positive
    for mut col in phi.column_iter_mut() {
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    Ok((values, phi))
}

/// Auto truncation rule: the smallest K whose K-th frequency reaches 1.5×
/// the analysis band, clamped to [4, 12] and to the available modes.
pub fn auto_mode_count(freqs_hz: &[f64]) -> usize {
    let target = 1.5 * ANALYSIS_BAND_HZ;
    let k = freqs_hz
        .iter()
        .position(|&f| f >= target)
        .map(|i| i + 1)
        .unwrap_or(freqs_hz.len());
    k.clamp(4, 12).min(freqs_hz.len())
}

/// Reduce the full-order operators to their first `k` modes.
pub fn solve_modes(
    ops: &DiscreteOperators,
    k: ModeCount,
    rayleigh_alpha: f64,
    rayleigh_beta: f64,
    load_resistance: f64,
) -> Result<ReducedModel> {
    let n = ops.dof_count();
    let (values, phi) = generalized_eigen(&ops.stiffness, &ops.mass)?;
    if values[0] <= 0.0 {
        return Err(Error::Assembly {
            dimension: "length",
            reason: alloc::format!(
                "stiffness is not positive definite after clamping (λ₁ = {:e})",
                values[0]
            ),
        });
    }
    let freqs_hz: Vec<f64> = values.iter().map(|v| libm::sqrt(*v) / TWO_PI).collect();
    let k = match k {
        ModeCount::Auto => auto_mode_count(&freqs_hz),
        ModeCount::Fixed(k) => {
            if k == 0 || k > n {
                return Err(invalid("num_modes", alloc::format!("must lie in [1, {n}], got {k}")));
            }
            k
        }
    };
    let shapes = phi.columns(0, k).into_owned();
    let omega: Vec<f64> = values[..k].iter().map(|v| libm::sqrt(*v)).collect();
    let k_o = DMatrix::from_diagonal(&DVector::from_iterator(k, values[..k].iter().cloned()));
    let c_o = DMatrix::identity(k, k) * rayleigh_alpha + &k_o * rayleigh_beta;
    let theta_o = shapes.transpose() * &ops.coupling;
    let theta_phi = theta_o.clone();
    let f_o = shapes.transpose() * &ops.base_force;
    Ok(ReducedModel {
        natural_freqs_rad: omega,
        mode_shapes: shapes,
        k_o,
        c_o,
        theta_o,
        theta_phi,
        f_o,
        capacitance: ops.capacitance,
        load_resistance,
    })
}

/// Assemble and reduce in one step using the config's damping, load and mode count.
pub fn build_model(config: &DeviceConfig) -> Result<ReducedModel> {
    let ops = assemble_plate(config)?;
    solve_modes(
        &ops,
        config.num_modes,
        config.rayleigh_alpha,
        config.rayleigh_beta,
        config.load_resistance,
    )
}
