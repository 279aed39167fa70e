//! Exponential random graph models for signed networks (SERGMs).
//!
//! A signed network assigns each unordered actor pair one of three states:
//! a positive tie, a negative tie, or no tie. This crate implements a
//! log-linear exponential-family distribution over all such networks,
//! together with everything needed to work with it in practice:
//!
//! * [`network`] — validated signed-network and panel containers,
//! * [`statistics`] — sufficient statistics (edge counts, isolates,
//!   stability, geometrically weighted shared-partner and degree terms,
//!   exogenous covariate terms, lagged common-friend/enemy terms), their
//!   per-dyad change statistics, and a triad balance census,
//! * [`sampler`] — Gibbs simulation via multinomial dyad conditionals,
//! * [`estimator`] — maximum pseudo-likelihood seeding and Monte-Carlo
//!   maximum likelihood with partial stepping and convex-hull safeguarding,
//! * [`inference`] — Fisher information, MCMC standard errors, confidence
//!   intervals,
//! * [`model_selection`] — bridge-sampling log-likelihood evaluation and AIC,
//! * [`gof`] — simulation-based goodness-of-fit summaries,
//! * [`oracle`] — exact enumeration over the full network space for small
//!   actor counts, used as ground truth in tests.
//!
//! Dynamic panels are modeled with first-order Markov dependence: each
//! period's network is drawn conditional on the previous one. A
//! cross-sectional network is the special case of a single modeled period
//! conditioned on an all-zero placeholder (see
//! [`NetworkSeries::cross_sectional`]).

pub mod error;
pub mod estimator;
pub mod gof;
pub mod inference;
pub mod model_selection;
pub mod network;
pub mod oracle;
pub mod sampler;
pub mod statistics;

pub use error::{Error, Result};
pub use network::{
    CovariateSet, DyadState, DyadicCovariates, NetworkSeries, Sign, SignedNetwork,
};
pub use statistics::{GwForm, ModelSpec, SignFilter, StatVector, Term};
