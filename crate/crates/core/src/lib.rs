//! Simulation and estimation toolkit for the contact process in a random
//! environment on Z^d.

pub mod blockperc;
pub mod config;
pub mod contact;
pub mod environment;
pub mod error;
pub mod harris;
pub mod lattice;
pub mod mc;
pub mod regeneration;
pub mod rng;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
