//! Cholesky multivariate stochastic volatility with generalized hyperbolic
//! skew-t structural errors, leverage, and spike-and-slab skew selection.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. With `std`, series-indexed sampler blocks, simulation
//! replications and forecast refits fan out over rayon.
//!
//! Layout:
//! - [`distributions`]: inverse gamma, GIG, truncated gamma, the GH skew-t
//!   mixture and the multivariate normal log density.
//! - [`model`]: parameter and state types plus the Cholesky algebra.
//! - [`priors`]: prior sets (baseline and the three sensitivity presets).
//! - [`samplers`]: one-sweep conditional samplers for every block.
//! - [`engine`], [`diagnostics`], [`geweke`]: MCMC orchestration and checks.
//! - [`simulate`], [`forecast`], [`portfolio`]: data generation, predictive
//!   densities, portfolio VaR backtesting.

#![cfg_attr(not(feature = "std"), no_std)]
// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diagnostics;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod forecast;
pub mod geweke;
pub mod model;
pub mod order;
pub mod panel;
pub mod portfolio;
pub mod priors;
pub mod rng;
pub mod samplers;
pub mod simulate;
pub mod stats;

mod par;

pub use engine::{run_mcmc, McmcDraws, McmcSettings};
pub use error::{Error, Result};
pub use model::{CovParams, LatentStates, ModelConfig, SeriesParams, Variant};
pub use panel::ReturnsPanel;
pub use priors::PriorSet;

pub(crate) mod prelude {
    pub use alloc::string::{String, ToString};
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    #[cfg(not(feature = "std"))]
    pub use num_traits::Float;
}
