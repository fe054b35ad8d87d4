//! Synthetic control estimation with simulation designs for studying
//! pre-treatment fit, over-fitting and validation.

pub mod cli;
pub mod config;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod io;
mod linalg;
pub mod montecarlo;
pub mod panel;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
