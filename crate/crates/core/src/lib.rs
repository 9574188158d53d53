//! Quantized Ding functionals, balanced metrics and test-configuration
//! invariants on toric Fano manifolds.
//!
//! - [`lattice`]: reflexive lattice polygons and the builtins `P1`, `P2`,
//!   `P1xP1`, `F1`.
//! - [`testconfig`]: toric test configurations from rational piecewise-linear
//!   convex functions, and their exact weight systems.
//! - [`invariants`]: exact Donaldson-Futaki, Chow and quantized Futaki
//!   invariants by polynomial fitting of weight sums.
//! - [`analysis`]: quadrature and log-sum-exp potentials on `R^n`.
//! - [`functionals`]: Fubini-Study and Hilbert maps, energies and the Ding
//!   functionals.
//! - [`balanced`]: the Donaldson iteration, Bergman rays and slope checks.
//! - [`verify`]: the acceptance checks behind `fano-balance verify-all`.

pub mod analysis;
pub mod balanced;
pub mod error;
pub mod functionals;
pub mod invariants;
pub mod io;
pub mod lattice;
pub mod poly;
pub mod rational;
pub mod testconfig;
pub mod verify;
