//! Dirichlet k-partitions of 2D and 3D domains by a diffusion-generated scheme that alternates
//! heat-kernel convolution, pointwise thresholding, and a normalized projection.
//!
//! Everything lives on a uniform periodic grid over `[-π, π]^dim`. Bounded domains are embedded
//! in the box through a [`domains::DomainMask`] and fields are zeroed outside it.

pub mod domains;
pub mod error;
pub mod grid;
pub mod init;
pub mod partition;
pub mod solver;
pub mod spectral;

pub use domains::{make_mask, restrict, DomainMask, ShapeName, ShapeParams};
pub use error::{Error, Result};
pub use grid::{integrate, l2_norm, GridSpec, ScalarField};

pub use init::{voronoi_init, Metric};
pub use solver::{eigen_solve, region_eigenvalues, solve, EigenConfig, PartitionOutcome, SolverConfig, Variant};
pub use partition::{
    project_u, relaxed_energy, threshold_phi, EnergyValue, MultiField, Partition,
};

pub use spectral::{heat_semigroup, HeatOperator, SpectralPlan};
