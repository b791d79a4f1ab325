//! Nonparametric test for a constant regression coefficient (beta) between
//! two assets observed at high frequency, with jump-robust truncation.
//!
//! The pipeline has four stages, one module each:
//!
//! * [`sim`] simulates bivariate log-price paths with stochastic (square-root)
//!   volatility, an optionally time-varying beta, and compound-Poisson jumps.
//! * [`stats`] turns one trading day of log-price increments into truncated
//!   block statistics and pooled beta estimates.
//! * [`testing`] aggregates per-day block statistics into the self-normalized
//!   test statistic, its p-value, and level decisions.
//! * [`mc`] runs seed-deterministic Monte Carlo size/power studies in
//!   parallel; [`io`] reads/writes the CSV formats and drives rolling-window
//!   reports over real data.
//!
//! The `betaconst` binary exposes all of this as `simulate`, `test`, `mc`,
//! and `window` subcommands.

pub mod error;
pub mod io;
pub mod mc;
pub mod sim;
pub mod stats;
pub mod testing;

pub use error::{Error, Result};
