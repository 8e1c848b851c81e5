//! Signal models built from generalized Fourier series whose coefficient
//! tensor is parameterized by a CP (canonical polyadic) decomposition.
//!
//! The crate provides:
//!
//! - [`basis`]: orthonormal 1-D basis families on `[0,1]` (cosine, shifted
//!   Legendre, weighted Chebyshev) and a quadrature Gram-matrix oracle.
//! - [`tensor`]: minimal dense tensor algebra: outer/Hadamard/generalized
//!   dot products, CP factor materialization, and the constructive fiber
//!   decomposition behind the rank upper bound.
//! - [`model`]: the factorized model itself: forward pass in optimal
//!   contraction order, analytic gradients, grid evaluation, checkpoints.
//! - [`gfs`]: a brute-force full-tensor reference path (quadrature
//!   projection and naive evaluation) used as a ground-truth oracle.
//! - [`optim`]: Adam, cosine annealing, batch sampling, TV and weight-decay
//!   regularizers.
//! - [`operators`]: measurement operators for inverse problems: box
//!   downsampling, a photon/readout sensor-noise model, and a discrete
//!   Radon transform with an exact adjoint.
//! - [`metrics`]: PSNR, SSIM, IoU.
//!
//! All floating-point work is `f64`. Every routine is deterministic for a
//! fixed seed: parallel reductions use fixed chunking folded in order, so
//! results are bitwise identical with or without the `parallel` feature.

pub mod basis;
pub mod error;
pub mod gfs;
pub mod grid;
pub mod grid_eval;
pub mod mat;
pub mod metrics;
pub mod model;
pub mod operators;
pub mod optim;
pub mod par;
pub mod tensor;

pub use error::{Error, Result};
