//! Ramp-aware aggregate flexibility envelopes for radial distribution networks.
//!
//! The crate builds linear programs over a [`netmodel::Scenario`] that bound
//! the net power at the grid connection point (GCP) between an upper and a
//! lower trajectory, such that every trajectory in between can be split into
//! device schedules that respect generator ramps, storage energy limits and
//! LinDistFlow voltage bounds.
//!
//! - [`netmodel`]: case data, voltage sensitivities, robust margins
//! - [`envelope`]: the no-ramp, baseline and pre-ramped envelope models
//! - [`disagg`]: interpolation-based disaggregation and Monte Carlo checks
//! - [`market`]: joint base schedule and envelope under market prices

pub mod assets;
pub mod disagg;
pub mod envelope;
pub mod market;
pub mod netmodel;

pub use flexenv_lp as lp;
