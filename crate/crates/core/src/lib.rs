//! Reverse stress testing with vine copulas.
//!
//! Given historical risk-factor changes and portfolio losses, this crate fits
//! a joint model (skew-t or kernel/Pareto hybrid marginals glued by a regular
//! vine copula) and searches for the most likely stress scenario: the mode of
//! the factor distribution conditional on the loss exceeding a threshold.
//!
//! The pieces are usable on their own:
//!
//! - [`univariate`]: skew-t and hybrid marginal models with exact cdf/quantile
//!   inverses and probability integral transforms.
//! - [`bicop`]: bivariate copula families (Gaussian, Student t, Clayton,
//!   Frank, BB1, rotations), h-functions, Kendall's tau, and model selection.
//! - [`rvine`]: regular vine structures, sequential structure selection,
//!   density evaluation, simulation, and leaf-constrained vine regression.
//! - [`scenario`]: stress-scenario estimators (joint-density, constrained
//!   factor-density, exceedance-weighted, and the exceedance-mean baseline)
//!   driven by a seeded differential-evolution optimizer.
//! - [`regimes`]: kernel-PCA summaries and two-component t-copula mixture
//!   clustering of (market, loss) dependence regimes.
//! - [`resample`]: stationary block bootstrap and scenario confidence bands.
//! - [`simstudy`]: synthetic data generators with known ground truth and a
//!   Monte Carlo study harness.

pub mod bicop;
pub mod error;
pub mod optim;
pub mod quadrature;
pub mod regimes;
pub mod resample;
pub mod rvine;
pub mod scenario;
pub mod simstudy;
pub mod special;
pub mod univariate;

mod book;

pub use error::{Error, Result};
