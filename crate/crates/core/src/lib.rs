//! Rotation-invariant polynomial regression on products of circles and
//! spheres.
//!
//! The crate covers tensor bases of Fourier and spherical-harmonic products,
//! their invariant subspaces, least-squares fits augmented by weighted
//! rotation sets (quadrature rules on SO(2) and SO(3) or Haar samples), the
//! resulting symmetrization error and its Schur-complement bound, data
//! distributions with random invariant targets, and a Verlet testbed for
//! approximate conservation of angular momentum.

pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harmonics;
mod linalg;
pub mod regression;
pub mod sampling;

pub use coupling::{enumerate_basis, sym_coeffs, BasisSpec, MultiIndex};
pub use dynamics::{PerturbedPotential, PhaseState, TrajectoryPoint};
pub use error::{Error, Result};
pub use geometry::{
    rotate_config, sample_haar, so2_quadrature, so3_quadrature_euler, verify_exactness, Configuration, Group,
    QuadratureRule, Rotation,
};
pub use harmonics::{generalized_d, GeneralizedD};
pub use linalg::{extreme_singular_values, Cutoff, LsqSolution};
pub use regression::{AugmentationScheme, Dataset, ReducedSystem, RegressionSolution};
pub use sampling::{DistributionName, DistributionSpec, TargetFunction};

pub use faer::c64;
