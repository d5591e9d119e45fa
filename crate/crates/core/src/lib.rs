//! Closest point method on surfaces given as intersections of level sets.

pub mod band_grid;
pub mod cpfn;
pub mod cpm_solver;
pub mod error;
pub mod geometry;
pub mod interp;
pub mod io;
pub mod ode;
pub mod operators;
pub mod quadrature;
pub mod reference;
pub mod verify;

pub use error::{CpError, Result};
