//! Dynamic bivariate normal copula toolkit.
//!
//! Models a triangular array of independent pairs `(X_i, Y_i)`, `i = 1..n`,
//! whose copula is bivariate normal with a sample-size-dependent correlation
//! `rho_i = 1 - m(i/n)/log n` for a drift function `m` on `[0, 1]`. The crate
//! provides:
//!
//! - [`math`]: normal cdf/quantile, adaptive quadrature, and seedable RNG
//!   streams that every other module builds on;
//! - [`copula`]: correlation paths, the copula density and conditional cdf,
//!   dependence-measure maps, and the triangular-array sampler;
//! - [`limit`]: the limiting joint law of normalized componentwise maxima,
//!   the stable tail dependence function and the tail coefficient, plus an
//!   empirical convergence experiment;
//! - [`param`]: score-equation estimation of `m` in the constant, linear and
//!   power families (Spearman and Pearson routes), asymptotic covariance
//!   reports, a Hotelling-type joint test and a constancy test;
//! - [`nonparam`]: local-linear estimation of `m` with kernel abstraction and
//!   the associated bandwidth rules;
//! - [`experiments`]: deterministic simulation/fitting drivers, Monte-Carlo
//!   table replication and CSV input/output shared with the CLI.

// `!(x > 0.0)` is the NaN-rejecting form of the domain checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops read better than iterator chains in the dense 3x3 algebra
#![allow(clippy::needless_range_loop)]

pub mod copula;
pub mod error;
pub mod experiments;
pub mod limit;
pub mod math;
pub mod nonparam;
pub mod param;

pub use error::{Error, Result};
