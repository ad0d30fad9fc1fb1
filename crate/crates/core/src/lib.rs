//! Optimality analysis for minimizing a smooth function over the set of
//! matrices of rank at most `r` that satisfy affine equality constraints.
//!
//! The crate computes the tangent and normal cones of the feasible set,
//! checks the linear-independence qualifications under which the normal
//! cone of the intersection splits into a sum, classifies candidate points
//! as F-, alpha- or M-stationary, runs second-order tests and searches for
//! alpha-stationary points with a projected gradient method.

pub mod affine;
pub mod analysis;
pub mod cones;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod problems;
pub mod qualification;
pub mod second_order;
pub mod solver;
pub mod stationarity;

pub use error::{Error, Result};
