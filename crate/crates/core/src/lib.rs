//! Frequency-domain 2D acoustics of rigid-metaporous absorber arrays.
//!
//! The crate models porous inserts with the Johnson-Champoux-Allard
//! equivalent-fluid model, rasterizes the parametric absorber geometry onto a
//! uniform grid, solves the heterogeneous Helmholtz equation
//! `∇·(ρ⁻¹∇p) + ω²K⁻¹p = 0` by finite differences with PML, Floquet and
//! hard-wall boundaries, and extracts reflection, absorption and
//! effective-index figures from the solved fields.
//!
//! Conventions: SI units, time dependence `e^{+iωt}`.

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod materials;
pub mod solver;

pub use error::{Error, Result};
