//! Invariant-likelihood estimation for incidental-parameter models.
//!
//! Four models share one numeric kernel: a stationary linear panel with fixed
//! effects (differencing likelihood), an agent-specific monotone
//! transformation model (rank likelihood), a simultaneous-equations IV model
//! (noncentral-Wishart likelihood of the projected cross-product, whose
//! maximizer coincides with LIMLK), and a dynamic panel with fixed effects
//! (noncentral-Wishart likelihood of `Y'Y/N`). The Wishart likelihoods hinge
//! on modified Bessel functions of the first kind at orders up to `(N-2)/2`,
//! which [`numkern`] evaluates in log space across all regimes.
//!
//! [`montecarlo`] is a deterministic, seeded simulation harness that
//! regenerates the dynamic-panel comparison tables (means and MSEs per
//! estimator over a grid of panel sizes).

pub mod comparators;
pub mod dyn_panel;
mod error;
pub mod iv_model;
pub mod montecarlo;
pub mod numkern;
pub mod rank_transform;
pub mod report;
pub mod selfcheck;
pub mod static_panel;

pub use error::{Error, Result};
pub use report::EstimateReport;
