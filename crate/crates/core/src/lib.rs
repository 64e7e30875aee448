//! Boundary integral equations on smooth closed curves, a Fourier-Galerkin
//! solver, dataset generation, and neural operators trained on the results.

pub mod assembly;
pub mod boundary;
pub mod datagen;
pub mod error;
pub mod fields;
pub mod kernels;
pub mod neuralops;
pub mod special;
pub mod trigseries;

pub use error::{Error, Result};
