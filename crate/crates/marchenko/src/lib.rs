//! Zero angular momentum quantum scattering in both directions: phase shifts
//! from a potential by direct radial integration, and the potential back from
//! scattering data by reducing the inverse problem's integral equation to a
//! family of small linear systems on a radial grid.
//!
//! Units: `hbar = 2m = 1`, so energy is momentum squared.

pub mod cli;
pub mod error;
pub mod forward;
pub mod numerics;
pub mod recovery;
pub mod scattering;
pub mod solver;

pub use error::{Error, Result};
