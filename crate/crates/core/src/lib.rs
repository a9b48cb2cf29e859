//! Pseudo-spectral IEQ time steppers for periodic gradient flows, with
//! relaxation and energy-optimization corrections of the auxiliary variable.

pub mod diagnostics;
pub mod error;
pub mod initcond;
pub mod io;
pub mod linsolve;
pub mod models;
pub mod spectral;
pub mod timestep;

pub use error::{Error, Result};
