//! Two-stage efficiency analysis: DEA scores from a dense simplex solver,
//! then censored (Tobit) regression of inefficiency on explanatory
//! variables.
//!
//! - [`dataset`]: role-tagged DMU data, CSV ingest, descriptives, groups
//! - [`lp`]: two-phase revised simplex with duals
//! - [`dea`]: envelopment models, slacks, peers, multiplier weights
//! - [`tobit`]: maximum-likelihood Tobit with inference tables
//! - [`pipeline`]: the two-stage run, synthetic data, report files
//! - [`cli`]: the `dea-tobit` command line

pub mod cli;
pub mod dataset;
pub mod dea;
pub mod lp;
pub mod pipeline;
pub mod tobit;
