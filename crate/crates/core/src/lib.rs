//! Monte Carlo sampling of the joint Compton scattering of annihilation
//! photon pairs, with analytic and quadrature checks of the scattering models.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod models;
pub mod quadrature;
pub mod quantum;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
