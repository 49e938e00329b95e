//! RFF-informed mixture-of-GAMs regression.
//!
//! The pipeline has three stages: a random Fourier feature regression whose
//! resampled frequencies summarise the dominant directions of variation, a
//! Gaussian mixture clustering of the data in the latent space spanned by the
//! top frequency directions, and per-cluster additive spline models blended
//! by the mixture responsibilities at prediction time.

// Link against the system BLAS/LAPACK.
extern crate blas_src;

pub mod augment;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gam;
pub mod gmm;
pub mod latent;
pub mod linalg;
pub mod mixture;
pub mod rff;
pub mod rng;
pub mod serialize;
pub mod standardize;

pub use error::{Result, RffGamError};
