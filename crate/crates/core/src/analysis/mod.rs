//! Numerical analysis on `R^n`: quadrature, log-sum-exp potentials and the
//! densities built from them.

pub mod density;
pub mod potential;
pub mod quadrature;

pub use density::*;
pub use potential::{Jet, ToricPotential};
pub use quadrature::{integrate, integrate_many, Integral, QuadratureSpec};
