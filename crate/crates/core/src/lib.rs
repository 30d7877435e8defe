//! Budgeted two-test screening of candidate pools with Bayesian optimization.

pub mod acquisition;
pub mod bench;
pub mod data;
pub mod engine;
pub mod error;
pub mod gp;
pub mod models;
pub mod par;
pub mod parallel;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
