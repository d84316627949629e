//! Simulation and inverse characterization of intermodal spontaneous
//! four-wave mixing in weakly guiding, birefringent step-index fibers.
//!
//! The crate is organized bottom-up:
//!
//! - [`dispersion`]: material and modal effective indices, with the
//!   polarization/parity unfolding of LP modes.
//! - [`modefield`]: normalized transverse field profiles.
//! - [`processes`]: process enumeration, OAM/parity selection rules and
//!   transverse overlaps.
//! - [`phasematch`]: phase mismatch, phase-matching curves, joint spectra
//!   and the multi-process two-photon state.
//! - [`gafit`]: genetic-algorithm recovery of fiber parameters from
//!   emission peaks.

pub mod bessel;
pub mod dispersion;
pub mod error;
pub mod fiber;
pub mod gafit;
pub mod modefield;
pub mod phasematch;
pub mod processes;
pub mod quadrature;

pub use error::{Error, Result};
pub use fiber::{CladdingMaterial, FiberParams, LpMode, Parity, Polarization};
