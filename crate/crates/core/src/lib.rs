//! Qudit statevector simulation and variational quantum classifiers.
//!
//! The crate covers the whole classification pipeline for qubit and qutrit
//! registers: feature rescaling and product-state encodings, trainable
//! affine encodings driven by class-density overlaps, classifier ansätze
//! (including the hardware-native qutrit gate set and its SU(3)
//! decomposition), the three optimizers used to train them, and the
//! repeated-holdout experiment drivers.

pub mod ansatz;
pub mod circuit;
pub mod density;
pub mod encoding;
pub mod encoding_opt;
mod error;
pub mod experiment;
pub mod gates;
pub mod io;
pub mod optim;
pub mod random;
pub mod shots;
pub mod state;
pub mod su3;
pub mod unitary;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Tolerance for algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-10;
/// Tolerance for checks that accumulate rounding error.
pub const ACCUMULATED_TOL: f64 = 1e-8;
