//! Simulation of a single-piston quantum engine whose working fluid is a
//! harmonic oscillator coupled to an externally driven piston through an
//! attractive Gaussian potential.
//!
//! Units throughout: energies in ħΩ, lengths in oscillator lengths, times in
//! oscillator periods (so the Schrödinger equation reads dΨ/dτ = −2πi H Ψ).
//!
//! The crate is organised bottom-up:
//!
//! - [`fock`]: truncated Fock basis, Hermite functions, Gauss–Hermite
//!   quadrature and Gaussian coupling matrices.
//! - [`model`]: piston trajectory, engine Hamiltonian and the composite
//!   fluid–bath Hamiltonian.
//! - [`dynamics`]: fifth-order Runge–Kutta propagation, spectral matrix
//!   exponentials, unitary conjugation.
//! - [`thermo`]: thermal states, tensor products, partial traces, the
//!   collision-model bath channel and number-basis measurement.
//! - [`engine`]: bath- and measurement-powered cycles, per-cycle
//!   thermodynamic bookkeeping, steady-state detection and the piston
//!   adiabaticity scan.

pub mod dynamics;
pub mod engine;
mod error;
pub mod fock;
pub mod model;
mod operator;
pub mod thermo;

pub use error::{Error, Result};
pub use faer::c64;
pub use operator::{DensityOperator, HermitianOperator, StateVector, UnitaryOperator};

pub use dynamics::{AdvanceModel, Numerics};
pub use engine::{CycleRecord, EngineRun, Mode, RunSummary};
pub use fock::{FockSpace, QuadratureRule};
pub use model::{EngineParams, PistonTrajectory};
pub use thermo::{CutoffPolicy, CutoffStatus, ThermalSpec};
