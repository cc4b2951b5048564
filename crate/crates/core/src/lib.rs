//! Gridless denoising of spectrally sparse signals whose atoms are
//! modulated by unknown waveforms living in a known subspace.
//!
//! The estimator solves `min_X 1/2 ||y - B(X)||^2 + lambda ||X||_A` through
//! its Toeplitz-block SDP, then reads frequencies off the dual polynomial.

pub mod atomic;
pub mod certificate;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use model::C64;
