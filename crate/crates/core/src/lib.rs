//! High-order operator splitting with complex timesteps for the two-factor
//! CIR bond pricing equation.
//!
//! The backward Kolmogorov generator is split into an affine drift, solved
//! exactly along characteristics, and a degenerate diffusion with killing,
//! propagated by a shift-and-invert Krylov approximation of the matrix
//! exponential on a Gauss–Lobatto–Legendre spectral-element mesh. Every
//! numerical type is generic over the real scalar; the aliases below fix it
//! to `f64`.

pub mod cir;
pub mod diffusion;
pub mod drift;
pub mod error;
pub mod experiments;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod ode;
pub mod oracle;
pub mod scalar;
pub mod splitting;
pub mod weighted_space;

pub use cir::{bond_price_cir2, riccati_bond_price, AffineBondCoeffs, CirFactor};
pub use diffusion::{assemble_l1, assemble_l1_1d, CsrMatrix, OperatorTerms};
pub use drift::{AffineDrift, DriftPropagator};
pub use error::{Error, Result};
pub use experiments::{
    emit_csv, read_csv, run_convergence, run_robustness, run_truncation, ConvergenceRecord, ConvergenceReport,
    ExperimentConfig,
};
pub use krylov::{expmv, FactorCache, KrylovConfig, KrylovVariant};
pub use mesh::{Axis, GllRule, Point};
pub use scalar::Real;
pub use splitting::{compose_step, evolve, Propagator, SplittingScheme};
pub use weighted_space::{weighted_sup_norm, Region, WeightFunction};

pub type Cir2Params = cir::Cir2Params<f64>;
pub type SpectralMesh = mesh::SpectralMesh<f64>;
pub type GridFunction = mesh::GridFunction<f64>;
pub type DiscreteOperator = diffusion::DiscreteOperator<f64>;
pub type DiffusionPropagator = krylov::DiffusionPropagator<f64>;
pub type Complex64 = num_complex::Complex<f64>;
