//! Device description: geometry, layer materials, wiring, load and the
//! discretization controls used by the plate model.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Planform and layer thicknesses, all in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub length_m: f64,
    pub width_m: f64,
    pub piezo_thickness_m: f64,
    pub substrate_thickness_m: f64,
}

impl Geometry {
    /// 50 mm wide, 0.25 mm piezo layers on a 0.50 mm substrate.
    pub fn standard(length_m: f64) -> Self {
        Self {
            length_m,
            width_m: 0.05,
            piezo_thickness_m: 0.25e-3,
            substrate_thickness_m: 0.50e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("geometry.length_m", self.length_m),
            ("geometry.width_m", self.width_m),
            ("geometry.piezo_thickness_m", self.piezo_thickness_m),
            ("geometry.substrate_thickness_m", self.substrate_thickness_m),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, alloc::format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Isotropic layer material. `e31` and `eps33_s` only matter for the
/// piezoelectric layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// kg/m³
    pub density: f64,
    /// Pa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Effective plane-stress piezoelectric constant, C/m².
    #[serde(default)]
    pub e31: f64,
    /// Clamped permittivity, F/m.
    #[serde(default)]
    pub eps33_s: f64,
}

impl Material {
    pub fn pzt5a() -> Self {
        Self {
            density: 7750.0,
            youngs_modulus: 61.0e9,
            poisson_ratio: 0.35,
            e31: -10.4,
            eps33_s: 1.33e-8,
        }
    }

    pub fn bronze() -> Self {
        Self {
            density: 8800.0,
            youngs_modulus: 105.0e9,
            poisson_ratio: 0.34,
            e31: 0.0,
            eps33_s: 0.0,
        }
    }

    fn validate(&self, which: &'static str, piezo: bool) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(invalid(which, "density must be positive"));
        }
        if !(self.youngs_modulus.is_finite() && self.youngs_modulus > 0.0) {
            return Err(invalid(which, "Young's modulus must be positive"));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(invalid(which, "Poisson ratio must lie in [0, 0.5)"));
        }
        if !self.e31.is_finite() {
            return Err(invalid(which, "e31 must be finite"));
        }
        if piezo && !(self.eps33_s.is_finite() && self.eps33_s > 0.0) {
            return Err(invalid(which, "eps33_s must be positive for the piezo layers"));
        }
        Ok(())
    }
}

/// Electrical connection of the two piezo layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wiring {
    #[default]
    Series,
    Parallel,
}

/// Number of retained modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeCount {
    /// Smallest K whose K-th frequency reaches 300 Hz, clamped to [4, 12].
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub geometry: Geometry,
    pub piezo: Material,
    pub substrate: Material,
    #[serde(default)]
    pub wiring: Wiring,
    /// Ω
    pub load_resistance: f64,
    /// Mass-proportional Rayleigh coefficient, 1/s.
    pub rayleigh_alpha: f64,
    /// Stiffness-proportional Rayleigh coefficient, s.
    pub rayleigh_beta: f64,
    #[serde(default = "default_degree")]
    pub spline_degree: usize,
    /// Control-net size (length direction, width direction).
    #[serde(default = "default_net")]
    pub control_net: (usize, usize),
    #[serde(default)]
    pub num_modes: ModeCount,
}

fn default_degree() -> usize {
    3
}

fn default_net() -> (usize, usize) {
    (24, 8)
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self::standard(0.15)
    }
}

impl DeviceConfig {
    /// PZT-5A / bronze bimorph with the standard cross-section, 100 Ω load
    /// and Rayleigh pair (14.65, 1e-5).
    pub fn standard(length_m: f64) -> Self {
        Self {
            geometry: Geometry::standard(length_m),
            piezo: Material::pzt5a(),
            substrate: Material::bronze(),
            wiring: Wiring::Series,
            load_resistance: 100.0,
            rayleigh_alpha: 14.65,
            rayleigh_beta: 1e-5,
            spline_degree: default_degree(),
            control_net: default_net(),
            num_modes: ModeCount::Auto,
        }
    }

    pub fn with_length(&self, length_m: f64) -> Self {
        let mut c = self.clone();
        c.geometry.length_m = length_m;
        c
    }

    /// Number of unconstrained coefficients once the clamped columns are removed.
    pub fn free_dofs(&self) -> usize {
        let (nx, ny) = self.control_net;
        nx.saturating_sub(2) * ny
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.piezo.validate("piezo", true)?;
        self.substrate.validate("substrate", false)?;
        if !(self.load_resistance.is_finite() && self.load_resistance > 0.0) {
            return Err(invalid("load_resistance", "must be positive"));
        }
        if !(self.rayleigh_alpha.is_finite() && self.rayleigh_alpha >= 0.0) {
            return Err(invalid("rayleigh_alpha", "must be non-negative"));
        }
        if !(self.rayleigh_beta.is_finite() && self.rayleigh_beta >= 0.0) {
            return Err(invalid("rayleigh_beta", "must be non-negative"));
        }
        let p = self.spline_degree;
        if p < 2 {
            return Err(invalid("spline_degree", "Kirchhoff-Love bending needs degree >= 2"));
        }
        let (nx, ny) = self.control_net;
        if nx < p + 2 {
            return Err(invalid(
                "control_net",
                alloc::format!("length direction needs at least {} coefficients, got {nx}", p + 2),
            ));
        }
        if ny < p + 1 {
            return Err(invalid(
                "control_net",
                alloc::format!("width direction needs at least {} coefficients, got {ny}", p + 1),
            ));
        }
        if let ModeCount::Fixed(k) = self.num_modes {
            if k == 0 || k > self.free_dofs() {
                return Err(invalid(
                    "num_modes",
                    alloc::format!("must lie in [1, {}], got {k}", self.free_dofs()),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for l in [0.05, 0.10, 0.15, 0.20, 0.25, 0.30] {
            DeviceConfig::standard(l).validate().unwrap();
        }
    }

    #[test]
    fn rejects_non_positive_thickness() {
        let mut c = DeviceConfig::standard(0.15);
        c.geometry.piezo_thickness_m = 0.0;
        assert!(c.validate().is_err());
        c.geometry.piezo_thickness_m = -1e-4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_coarse_length_net() {
        let mut c = DeviceConfig::standard(0.15);
        c.control_net = (4, 8);
        let err = c.validate().unwrap_err();
        assert!(alloc::format!("{err}").contains("control_net"));
    }

    #[test]
    fn rejects_too_many_modes() {
        let mut c = DeviceConfig::standard(0.15);
        c.num_modes = ModeCount::Fixed(c.free_dofs() + 1);
        assert!(c.validate().is_err());
    }
}
