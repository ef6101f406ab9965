//! Numerical core for co-designing cantilever bimorph piezoelectric
//! harvesters as both power sources and traffic sensors.
//!
//! Everything here is `no_std` + `alloc`: plate discretization and modal
//! reduction, the coupled voltage response, wavelet and correlation signal
//! processing, the synthetic traffic generator and a linear baseline
//! classifier. File formats, the CLI and the sweep orchestration live in the
//! `peh` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub use num_complex;

pub mod bspline;
pub mod classify;
pub mod config;
pub mod error;
pub mod fft;
pub mod integrate;
pub mod modal;
pub mod plate;
pub mod response;
pub mod series;
pub mod signal;
pub mod synth;

pub use config::{DeviceConfig, Geometry, Material, ModeCount, Wiring};
pub use error::{Error, Result};
pub use modal::{build_model, solve_modes, ReducedModel};
pub use plate::{assemble_plate, beam_oracle_f1, capacitance, DiscreteOperators};
pub use integrate::{simulate_voltage, ExactHold, Integrator, SolverOpts};
pub use response::{frf_voltage, harvested_energy, EnergyAccumulator, FrfCurve};
pub use series::{Quantity, TimeSeries};
