//! Berry phase, non-adiabatic corrections and dephasing of a two-level system
//! whose noise-coupling axis is carried around a closed loop.
//!
//! Units: frequencies are in rad/time and times in the matching inverse unit.
//! Spectral densities are written in the dimensionless frequency `x = Ω/Ω_m`.

pub mod decompose;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod kernel;
pub mod ode;
pub mod oracle;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
