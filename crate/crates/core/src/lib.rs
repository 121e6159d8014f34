//! Second-order Poincaré bounds for Gaussian functionals, evaluated by Monte
//! Carlo and checked against simulated distances.

pub mod distance;
pub mod error;
pub mod experiment;
pub mod function;
pub mod hermite;
pub mod linalg;
pub mod poincare;
pub mod quad;
pub mod rate;
pub mod rng;
pub mod sheet;
pub mod sim;
pub mod stationary;
pub mod wigner;

pub use error::{Error, Result};
