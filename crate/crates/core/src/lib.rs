//! Semi-Lagrangian solvers for Wigner-type transport equations in phase space.
//!
//! The free-streaming part is advanced exactly by characteristic shifts evaluated
//! with cubic B-splines; the spline solve can be split over patches that exchange
//! two boundary values per junction. The nonlocal pseudo-differential term is
//! evaluated spectrally and combined with the shifts by predictor-corrector
//! schemes or operator splitting.

pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod integrators;
pub mod metrics;
pub mod par_spline;
pub mod problems;
pub mod psido;
pub mod spline;

pub use error::{Error, Result};
pub use field::StateField;
pub use grid::{make_patch_layout, Axis, PatchLayout, PhaseGrid};

#[cfg(test)]
pub(crate) mod testutil;
