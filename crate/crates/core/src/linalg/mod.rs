//! Linear algebra kernels used by the diffusion propagator.

pub mod band;
pub mod dense;

pub use band::{BandLu, BandMatrix, BandScalar};
pub use dense::{DenseLu, DenseMatrix};
