//! Homogenized Gibbs-Landau free energy of periodic composite ferromagnets.
//!
//! The crate is organized bottom-up:
//!
//! * [`material`]: voxelized unit-cell descriptions, validation, generators
//!   and periodic sampling onto a domain.
//! * [`cellsolve`]: periodic cell problems on `Q = [0,1]^3`, the effective
//!   exchange tensor `A_hom` and the magnetostatic correction matrix `B`.
//! * [`demag`]: open-boundary stray field of a voxelized moment density.
//! * [`energy`]: fine-scale and homogenized energies, gradients and a
//!   projected-gradient minimizer on sphere-valued fields.
//! * [`converge`]: epsilon sweeps that check the limit statements numerically.
//! * [`suite`]: the verification suite used by the `verify` command.

#![allow(clippy::needless_range_loop)]

pub mod cellsolve;
pub mod converge;
pub mod demag;
pub mod energy;
mod error;
pub mod linalg;
pub mod material;
pub mod suite;

pub use error::{Error, Result};

/// Default magnetic constant of the nondimensional unit system.
pub const DEFAULT_MU0: f64 = 1.0;
