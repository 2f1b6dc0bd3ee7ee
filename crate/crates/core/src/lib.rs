//! Ricci flow on the flat unit torus started from singular conformal data.
//!
//! The crate covers the periodic grid and its spectral solvers, potentials
//! with logarithmic poles, the scalar Monge–Ampère flow, distances of
//! conformal metrics, and executable checks of the estimates along the flow.

pub mod cutoff;
pub mod error;
pub mod flow;
pub mod green;
pub mod interp;
pub mod io;
pub mod metric;
pub mod potentials;
pub mod quadrature;
pub mod torus;
pub mod verify;

pub use error::{Error, Result};
pub use green::GreenFunction;
pub use torus::{laplacian, solve_poisson, Point, ScalarField, Stencil, TorusGrid};
