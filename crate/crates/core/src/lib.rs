//! Radial defocusing semilinear wave equation: a finite-volume solver plus
//! diagnostics for the inward/outward energy theory (energy split, light-cone
//! fluxes, Morawetz estimates, weighted decay and energy-norm scattering).

pub mod energy;
pub mod error;
pub mod estimates;
pub mod flux;
pub mod mathlib;
pub mod scattering;
pub mod solver;

pub use error::{Error, Result};
