//! Simulation and optimization of stroboscopic trapped-ion entangling gates
//! that interleave spin-dependent-force displacements with
//! parametric-amplification squeezing pulses.

pub mod engine;
pub mod error;
pub mod gaussian;
pub mod modes;
pub mod noise;
pub mod optimize;
pub mod oracle;
pub mod schedule;

pub use error::{Error, Result};
pub use num_complex::Complex64;
