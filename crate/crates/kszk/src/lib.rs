//! Spectral Galerkin solver and verification harness for a damped
//! Kuramoto-Sivashinsky equation with a Zakharov-Kuznetsov dispersive term,
//! posed as a gradient system on rectangular boxes.
//!
//! The crate has two jobs:
//!
//! * simulate the system `u_t + Lap^2 u + Lap u + (Lap u)_{x_1}
//!   + (1/2) grad |u|^2 = 0` for the gradient field `u = grad phi` in a
//!   product-sine basis with hinged (Navier) boundary conditions, and
//! * check the analytical decay machinery numerically: the box admissibility
//!   conditions, the exponential H2 decay envelope, the dissipation-integral
//!   bound, and the functional inequalities behind them.
//!
//! Modules follow that split: [`geometry`] owns the admissibility constants,
//! [`basis`] the sine transforms and norms, [`solver`] the time stepper,
//! [`diagnostics`] the decay fits and inequality suites, and [`config`] /
//! [`cli`] the command-line surface.

pub mod basis;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod snapshot;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
