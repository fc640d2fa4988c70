//! Influence-function estimation for small dense networks, with the proximal
//! Bregman response function (PBRF) as the comparison target.
//!
//! The crate is organized around the pipeline it supports:
//!
//! - [`nn`]: dense feed-forward networks with exact derivative oracles
//!   (gradients, Hessian-vector products, output-Jacobian-vector products,
//!   Gauss-Newton-Hessian-vector products).
//! - [`data`]: dataset construction (CSV, synthetic generators), normalization,
//!   deterministic label corruption, and example removal.
//! - [`train`]: deterministic optimization of the downweighted, proximal,
//!   Bregman, and linearized-Bregman objectives, including the six-parameter-set
//!   retraining protocol.
//! - [`solvers`]: damped inverse-curvature-vector products (exact dense solve,
//!   conjugate gradients, LiSSA).
//! - [`influence`]: parameter-space and test-loss influence estimators plus the
//!   `s_test` batching trick.
//! - [`decompose`]: the five-term discrepancy decomposition between influence
//!   estimates and leave-one-out retraining, correlation analysis, factor
//!   sweeps, and mislabel-detection curves.
//!
//! All numerics are `f64`. Every operation is a pure function of its inputs;
//! parallel callers only need shared references.

pub mod data;
pub mod decompose;
pub mod error;
pub mod influence;
pub mod nn;
pub mod oracles;
pub mod persist;
pub mod solvers;
pub mod train;

pub use error::{Error, Result};
