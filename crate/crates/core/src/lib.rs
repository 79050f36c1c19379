//! Numerical laboratory for a two-component epidemic model with nonlocal
//! (kernel) dispersal and a free right boundary.
//!
//! The crate is organised by task: [`model`] holds the parameter objects and
//! closed-form diagnostics, [`discretization`] the quadrature, [`spectral`] the
//! principal eigenvalue and critical length, [`steady`] the monotone steady
//! state iteration, [`dynamics`] the time steppers, [`classifier`] the
//! spreading/vanishing decision logic and [`io`] configuration and output
//! formats.

pub mod classifier;
pub mod discretization;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod model;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
