//! Pseudo-spectral Navier–Stokes on periodic boxes, and explicit stability
//! bounds for 2D flows under 3D perturbations.
//!
//! The crate is `no_std` (with `alloc`); IO and the command line live in the
//! companion `ns-stability` crate.

#![no_std]

extern crate alloc;

pub mod certificate;
pub mod experiments;
pub mod error;
pub mod fft;
pub mod field;
pub mod forcing;
pub mod grid;
pub mod integrator;
pub mod math;
pub mod quadrature;
pub mod random;

pub use error::{Error, Result};
pub use field::{MeanVector, MultiIndex, SpectralField};
pub use grid::PeriodicGrid;
pub use num_complex::Complex64;
