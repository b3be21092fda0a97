//! Discrete fractional and local energies, their minimization under
//! complementary-value constraints, and order sweeps of the minima.

pub mod density;
pub mod problem;
pub mod solver;
pub mod sweep;

pub use density::{DensityContext, EnergyDensity, Growth};
pub use problem::{Smoothness, VariationalProblem};
pub use solver::{minimize, SolveReport};
pub use sweep::{gamma_sweep, GammaSweep, SweepOptions};
