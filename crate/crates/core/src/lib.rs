//! Collective photon emission from arrays of two-level emitters.
//!
//! This crate simulates the decay of fully inverted emitter ensembles coupled
//! through a shared electromagnetic environment. It provides:
//!
//! - lattice geometries and dipole orientations ([`geometry`]),
//! - coherent/dissipative coupling matrices built from the free-space Green's
//!   tensor, a bidirectional waveguide reservoir, or idealized all-to-all and
//!   independent reservoirs ([`couplings`]),
//! - a symbolic spin-operator engine that derives equations of motion for
//!   correlation functions and closes the hierarchy with second- or
//!   third-order cumulant truncations ([`spin`], [`eom`], [`cumulant`]),
//! - an exact density-matrix solver for small systems ([`exact`]),
//! - a shared adaptive Runge-Kutta integrator with dense output
//!   ([`integrator`]),
//! - emission-rate observables and peak detection ([`observables`]),
//! - sweep orchestration and scaling-exponent extraction ([`scaling`]).
//!
//! All quantities are expressed in natural units: the single-emitter decay
//! rate is 1, lengths are in units of the transition wavelength, and times in
//! inverse decay rates.

pub mod couplings;
pub mod cumulant;
pub mod eom;
pub mod exact;
pub mod geometry;
pub mod integrator;
pub mod linalg;
pub mod observables;
pub mod scaling;
pub mod solver;
pub mod spin;

pub use couplings::{CouplingMatrix, ReservoirKind};
pub use cumulant::{ClosureOrder, CumulantState};
pub use exact::DensityMatrix;
pub use geometry::{EmitterArray, LatticeKind, Polarization, PolarizationKind};
pub use integrator::IntegratorConfig;
pub use observables::EmissionTrace;
pub use scaling::{ScalingResult, SweepPlan};
pub use solver::{DecayModel, SimulateOptions};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;

/// Wavenumber of the emitter transition in natural units (wavelength = 1).
pub const K0: f64 = 2.0 * std::f64::consts::PI;
