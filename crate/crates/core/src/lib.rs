//! Link-level simulation of two-port comb-pilot channel estimation with
//! cyclic-shift port multiplexing.
//!
//! The modules build on each other bottom-up: [`numerics`] (matrices,
//! Hermitian solves, RNG streams), [`channel`] (power-delay profiles,
//! frequency responses, covariances), [`dmrs`] (pilots and LS observations),
//! [`estimators`], [`analysis`] (closed-form MSE and coefficient matrices)
//! and [`harness`] (Monte-Carlo sweeps and CSV reports).

pub mod analysis;
pub mod channel;
pub mod dmrs;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod numerics;
pub mod par;

pub use error::{Error, Result};
pub use num_complex::Complex64;
