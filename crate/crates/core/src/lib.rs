//! Numerical laboratory for rationally twisted exponential sums of GL(3)
//! Hecke-Maass coefficients.

pub mod coeffs;
pub mod error;
pub mod fit;
pub mod numtheory;
pub mod riesz;
pub mod voronoi;
pub mod experiments;
pub mod special;
pub mod sum;

pub use error::{Error, Result};
