//! Finite element core for the unsteady p-Navier-Stokes equations.
//!
//! The crate implements an implicit Rothe-Galerkin scheme: backward Euler in
//! time with interval-averaged (Clément 0-order) data, and mixed velocity /
//! pressure finite elements on triangles with a discrete divergence
//! constraint. The convective term uses the Temam skew-symmetrisation so the
//! discrete kinetic energy obeys the same balance as the continuous one.
//!
//! Everything here is pure computation and builds without `std`; file
//! formats, configuration and the command line live in the `rothe` crate.
//!
//! Module map:
//! - [`mesh`]: rectangle triangulations and regular 1:4 refinement.
//! - [`elements`]: quadrature, bases and degree-of-freedom layouts for the
//!   MINI, Taylor-Hood and conforming Crouzeix-Raviart pairs.
//! - [`constitutive`]: the (p, δ) power-law stress, its derivative and the
//!   natural map `F`.
//! - [`forms`]: residual and Newton Jacobian of one implicit step.
//! - [`nonlinear`]: sparse LU and damped Newton.
//! - [`timestepping`]: the Rothe loop and the discrete energy ledger.
//! - [`analysis`]: error norms, EOC tables, singular quadrature.
//! - [`experiments`]: the vortex, singular and manufactured setups.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod constitutive;
pub mod elements;
mod error;
pub mod experiments;
pub mod forms;
pub mod mesh;
pub mod nonlinear;
pub mod timestepping;

pub use error::{Error, Result};
pub use mesh::Point2;
