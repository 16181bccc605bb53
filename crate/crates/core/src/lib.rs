//! Numerical core for the two-dimensional Oberbeck–Boussinesq system with the
//! non-local temperature boundary condition `Theta = thetaB - alpha mean(Theta)`
//! on the walls.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. It provides the
//! staggered grid and field containers, the elliptic solvers, the algebra of
//! the non-local condition, the temperature and momentum steppers, steady
//! states with their stability checks, and the diagnostics used to monitor
//! energy balances and long-time behaviour.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod diagnostics;
pub mod elliptic;
pub mod equilibrium;
pub mod error;
pub mod flow;
pub mod grid;
pub mod heat;
pub mod init;
pub mod nonlocal;

pub use data::{alpha_from_gamma, make_potential, AdvectionScheme, BcCoupling, GSpec, Params, ThetaBSpec};
pub use diagnostics::DiagnosticsLog;
pub use equilibrium::{EquilibriumSolution, StabilityReport};
pub use error::{Error, Result};
pub use flow::{StepOutcome, Stepper};
pub use grid::{build_grid, EdgeTrace, Grid, ScalarField, SimState, VectorField};
pub use nonlocal::BoundaryClosure;
