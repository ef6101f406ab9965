//! Galerkin discretization of the bimorph cantilever as a Kirchhoff-Love
//! plate on a tensor-product B-spline basis.
//!
//! Coefficient `(i, j)` (i along the length, j across the width) maps to the
//! unknown `i * n_y + j`. The clamped edge at `x = 0` removes the first two
//! coefficient columns `i = 0, 1`, which fixes deflection and normal slope.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bspline::{gauss_legendre, KnotVector};
use crate::config::{DeviceConfig, Wiring};
use crate::error::{Error, Result};

/// Number of constrained coefficient columns at the root.
pub const CLAMPED_COLUMNS: usize = 2;

/// Through-thickness constants of the three-layer laminate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Laminate {
    /// Plane-stress bending matrix entries D11 (= D22), D12, D66, in N·m.
    pub d11: f64,
    pub d12: f64,
    pub d66: f64,
    /// Mass per unit area, kg/m².
    pub areal_mass: f64,
    /// Electro-mechanical moment arm, C/m.
    pub coupling_arm: f64,
}

impl Laminate {
    pub fn from_config(config: &DeviceConfig) -> Self {
        let g = &config.geometry;
        let (hs, hp) = (g.substrate_thickness_m, g.piezo_thickness_m);
        let half = hs / 2.0;
        // substrate [-hs/2, hs/2], piezo layers [hs/2, hs/2 + hp] and its mirror
        let layers = [
            (&config.substrate, -half, half),
            (&config.piezo, half, half + hp),
            (&config.piezo, -half - hp, -half),
        ];
        let (mut d11, mut d12, mut d66) = (0.0, 0.0, 0.0);
        for (mat, zb, zt) in layers {
            let nu = mat.poisson_ratio;
            let d = mat.youngs_modulus / (1.0 - nu * nu) * (zt * zt * zt - zb * zb * zb) / 3.0;
            d11 += d;
            d12 += nu * d;
            d66 += 0.5 * (1.0 - nu) * d;
        }
        let wiring_factor = match config.wiring {
            Wiring::Series => 1.0,
            Wiring::Parallel => 2.0,
        };
        Self {
            d11,
            d12,
            d66,
            areal_mass: config.substrate.density * hs + 2.0 * config.piezo.density * hp,
            coupling_arm: wiring_factor * config.piezo.e31 * (hp + hs) / 2.0,
        }
    }
}

/// Full-order operators after clamped-edge elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperators {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Coupling per unknown, C/m.
    pub coupling: DVector<f64>,
    /// F
    pub capacitance: f64,
    /// Inertial load of a unit base acceleration, `-(M·1)` restricted to the free unknowns.
    pub base_force: DVector<f64>,
    pub laminate: Laminate,
}

impl DiscreteOperators {
    pub fn dof_count(&self) -> usize {
        self.mass.nrows()
    }
}

/// Piezo capacitance seen by the load.
pub fn capacitance(config: &DeviceConfig) -> f64 {
    let g = &config.geometry;
    let area = g.length_m * g.width_m;
    let eps = config.piezo.eps33_s;
    match config.wiring {
        Wiring::Series => eps * area / (2.0 * g.piezo_thickness_m),
        Wiring::Parallel => 2.0 * eps * area / g.piezo_thickness_m,
    }
}

/// Euler-Bernoulli first cantilever frequency (Hz) of the composite bimorph,
/// used as an independent check on the plate model. Poisson effects are ignored.
pub fn beam_oracle_f1(config: &DeviceConfig) -> f64 {
    let g = &config.geometry;
    let (hs, hp) = (g.substrate_thickness_m, g.piezo_thickness_m);
    let es = config.substrate.youngs_modulus;
    let ep = config.piezo.youngs_modulus;
    let rigidity = es * hs * hs * hs / 12.0
        + (2.0 / 3.0) * ep * (libm::pow(hs / 2.0 + hp, 3.0) - libm::pow(hs / 2.0, 3.0));
    let areal_mass = config.substrate.density * hs + 2.0 * config.piezo.density * hp;
    let l = g.length_m;
    let beta_l = 1.875_104_068_711_961;
    beta_l * beta_l / (2.0 * core::f64::consts::PI)
        * libm::sqrt(rigidity / (areal_mass * l * l * l * l))
}

/// Assemble mass, stiffness and coupling for the clamped bimorph.
pub fn assemble_plate(config: &DeviceConfig) -> Result<DiscreteOperators> {
    config.validate()?;
    let g = &config.geometry;
    let p = config.spline_degree;
    let (nx, ny) = config.control_net;
    let kx = KnotVector::open_uniform(nx, p, g.length_m);
    let ky = KnotVector::open_uniform(ny, p, g.width_m);
    let lam = Laminate::from_config(config);

    let n_full = nx * ny;
    let mut mass = DMatrix::<f64>::zeros(n_full, n_full);
    let mut stiff = DMatrix::<f64>::zeros(n_full, n_full);
    let mut coupling = DVector::<f64>::zeros(n_full);

    let (gp, gw) = gauss_legendre(p + 1);
    let nloc = (p + 1) * (p + 1);
    let mut idx = vec![0usize; nloc];
    let mut val = vec![0.0; nloc];
    let mut wxx = vec![0.0; nloc];
    let mut wyy = vec![0.0; nloc];
    let mut wxy = vec![0.0; nloc];

    for (sx, x0, x1) in kx.elements() {
        let jx = 0.5 * (x1 - x0);
        for (sy, y0, y1) in ky.elements() {
            let jy = 0.5 * (y1 - y0);
            for a in 0..=p {
                for b in 0..=p {
                    idx[a * (p + 1) + b] = (sx - p + a) * ny + (sy - p + b);
                }
            }
            for (qx, wqx) in gp.iter().zip(&gw) {
                let x = x0 + jx * (qx + 1.0);
                let bx = kx.ders_basis(sx, x, 2);
                for (qy, wqy) in gp.iter().zip(&gw) {
                    let y = y0 + jy * (qy + 1.0);
                    let by = ky.ders_basis(sy, y, 2);
                    let w = wqx * wqy * jx * jy;
                    for a in 0..=p {
                        for b in 0..=p {
                            let l = a * (p + 1) + b;
                            val[l] = bx[0][a] * by[0][b];
                            wxx[l] = bx[2][a] * by[0][b];
                            wyy[l] = bx[0][a] * by[2][b];
                            wxy[l] = bx[1][a] * by[1][b];
                        }
                    }
                    for r in 0..nloc {
                        let gr = idx[r];
                        coupling[gr] += w * lam.coupling_arm * (wxx[r] + wyy[r]);
                        // moments of the r-th test function
                        let mxx = lam.d11 * wxx[r] + lam.d12 * wyy[r];
                        let myy = lam.d12 * wxx[r] + lam.d11 * wyy[r];
                        let mxy = 4.0 * lam.d66 * wxy[r];
                        for c in 0..nloc {
                            let gc = idx[c];
                            mass[(gr, gc)] += w * lam.areal_mass * val[r] * val[c];
                            stiff[(gr, gc)] +=
                                w * (mxx * wxx[c] + myy * wyy[c] + mxy * wxy[c]);
                        }
                    }
                }
            }
        }
    }

    let ones = DVector::<f64>::from_element(n_full, 1.0);
    let inertia = &mass * &ones;

    let skip = CLAMPED_COLUMNS * ny;
    let n = n_full - skip;
    let mass = mass.view((skip, skip), (n, n)).into_owned();
    let stiffness = stiff.view((skip, skip), (n, n)).into_owned();
    let coupling = coupling.rows(skip, n).into_owned();
    let base_force = -inertia.rows(skip, n).into_owned();

    check_definite(&mass, "mass", config)?;
    check_definite(&stiffness, "stiffness", config)?;

    Ok(DiscreteOperators {
        mass,
        stiffness,
        coupling,
        capacitance: capacitance(config),
        base_force,
        laminate: lam,
    })
}

fn check_definite(m: &DMatrix<f64>, what: &str, config: &DeviceConfig) -> Result<()> {
    let (nx, ny) = config.control_net;
    let chol = m.clone().cholesky().ok_or_else(|| Error::Assembly {
        dimension: "control_net",
        reason: format!("{what} matrix is not positive definite for a {nx}x{ny} net"),
    })?;
    let diag: Vec<f64> = chol.l_dirty().diagonal().iter().map(|d| d * d).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let (imin, min) = diag
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
    if !(min > max * 1e-14) {
        let dimension = if imin / ny + CLAMPED_COLUMNS < nx / 2 { "length" } else { "width" };
        return Err(Error::Assembly {
            dimension,
            reason: format!("{what} matrix is ill-conditioned (pivot ratio {:e})", min / max),
        });
    }
    Ok(())
}
