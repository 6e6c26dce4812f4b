//! Spectral simulator for the bi-conformal heat flow of biharmonic maps from
//! the flat 4-torus into round spheres.

pub mod error;
pub mod lattice;
pub mod target;
pub mod init;
pub mod flow;
pub mod fixedpoint;
pub mod diagnostics;
pub mod cli;

pub use error::{Error, Result};
