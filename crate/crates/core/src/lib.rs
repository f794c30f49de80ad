//! Projection-score dictionary selection for sparse system identification.
//!
//! The crate builds candidate libraries, scores sub-dictionaries by how much
//! of the target's projection they carry, and offers greedy and exhaustive
//! selection alongside thresholded least squares, stepwise regression and
//! orthogonal matching pursuit. Weak-form transforms and benchmark data
//! generators cover the ODE and 1-D PDE experiments.

pub mod datagen;
pub mod error;
pub mod library;
pub mod linops;
pub mod regressors;
pub mod scoring;
pub mod weakform;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
