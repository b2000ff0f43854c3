//! Accelerated gradient and parallel coordinate descent for smooth losses
//! with optional L1 regularization, together with the sparsity measures that
//! set their step sizes.

mod error;

pub mod cli;
pub mod data;
pub mod loss;
pub mod rng;
pub mod schedule;
pub mod solver;
pub mod trace;

pub use error::{Error, ErrorKind, Result};
