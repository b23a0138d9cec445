//! File formats, experiment runs and the command line around `rothe-core`.
//!
//! - [`config`]: the flat `key = value` experiment description.
//! - [`run`]: single runs with their output directory, convergence sweeps.
//! - [`verify`]: the invariant suite.
//! - [`mesh_io`], [`checkpoint`], [`vtk`], [`ledger`]: text formats.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod ledger;
pub mod mesh_io;
pub mod run;
pub mod verify;
pub mod vtk;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use rothe_core as core;
