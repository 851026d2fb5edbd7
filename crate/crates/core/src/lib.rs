//! Closed quench cycles in the Lipkin-Meshkov-Glick (LMG) model.
//!
//! The model is `H = J_x^2 - (2J/Λ) J_z` in the maximal-spin sector
//! `J = N/2` (units with χ = 1). Parity `Π = exp(iπ(J_z + J))` commutes with
//! `H`, so every Hamiltonian splits into two symmetric tridiagonal blocks.
//! Above the critical energy `E_c = 2J²/Λ` the two blocks carry degenerate
//! doublets; below it they do not. Driving a symmetry-broken state across
//! that line and back recovers the energy distribution but dephases the
//! doublet coherences, which is what this crate measures.
//!
//! Module map:
//! - [`spin`]: angular-momentum operators, initial states, parity.
//! - [`spectral`]: Hamiltonian assembly, parity blocks, eigensolver, gap scan.
//! - [`cache`]: shared decomposition cache with an optional on-disk store.
//! - [`dynamics`]: the five-segment Λ(t) schedule and state propagation.
//! - [`observables`]: measurement distributions, information, dissipation.
//! - [`equilibrium`]: time-averaged ensembles and von Neumann entropy.

pub mod cache;
pub mod chebyshev;
pub mod dynamics;
pub mod equilibrium;
mod error;
pub mod observables;
pub mod spectral;
pub mod spin;
pub mod tridiag;

pub use error::{Error, Result};
pub use num_complex::Complex64;
