//! Riesz fractional gradients on periodic grids.

pub mod acceptance;
pub mod analysis;
pub mod config;
pub mod constants;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod minors;
pub mod path;
pub mod quadrature;
pub mod registry;
pub mod spectral;
pub mod table;
pub mod testfn;
pub mod variational;

pub use error::{Error, Result};
