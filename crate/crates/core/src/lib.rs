//! Self-normalized two-sample tests for relevant differences between the
//! eigenfunctions (and eigenvalues) of the covariance operators of two
//! independent functional time series.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, caching,
//! parallel drivers and the command line live in the `fpcrel` crate.
//!
//! Module map:
//!
//! - [`fda`]: uniform grids, curves, samples, quadrature inner products.
//! - [`smooth`]: least-squares smoothing of raw points onto cubic B-splines
//!   or a Fourier basis.
//! - [`linalg`]: dense symmetric eigensolver and least squares.
//! - [`covop`]: full and sequential covariance kernels, eigensystems.
//! - [`selfnorm`]: the statistics `D̂`, `V̂`, `Ŵ` and the eigenvalue variant.
//! - [`nulldist`]: Monte Carlo law of the pivotal limit `W`.
//! - [`multiplicity`]: Bonferroni and Holm corrections.
//! - [`dgp`]: the Fourier/VAR(1) simulation model and power studies.
//! - [`lrv`]: long-run variance diagnostic and the plug-in normal test.
//! - [`annual`]: daily series to detrended annual curves.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod annual;
pub mod covop;
pub mod dgp;
mod error;
pub mod fda;
pub mod linalg;
pub mod lrv;
pub(crate) mod math;
pub mod multiplicity;
pub mod normal;
pub mod nulldist;
pub mod rng;
pub mod selfnorm;
pub mod smooth;

pub use error::{Error, Result};
pub use fda::{center, inner_product, norm_sq, Curve, CurveSample, Grid};
