//! Mesoscale asymptotics for the first eigenvalue and eigenfunction of the
//! Laplacian in a ball perforated by many small Dirichlet spheres, with a
//! Neumann condition on the outer boundary.

// `!(a < b)` is used on purpose so that NaN fails validation checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod homogenize;
pub mod kernels;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
