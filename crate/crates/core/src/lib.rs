//! Interdependent-value auctions.
//!
//! Valuation models with single-crossing and heterogeneity estimators,
//! single- and multi-item mechanisms, equilibrium verification over finite
//! grids, welfare benchmarks and the experiment suite behind the `ivauctions`
//! command-line tool.

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod json;
pub mod mechanisms;
pub mod scenario;
pub mod valuation;
pub mod welfare;

pub use error::{Error, Issue, Result};
