//! Multi-resolution hazard (MRH) models for right-censored survival data.
//!
//! The baseline hazard of each stratum is a depth-`M` dyadic tree of split
//! parameters over `2^M` equal-width bins, with a Gamma prior on the total
//! cumulative hazard and Beta priors on the splits. Covariates enter either
//! proportionally (`exp(X'beta)`) or as strata with their own hazard trees.
//! Estimation prunes statistically flat splits, then runs an adaptive
//! Metropolis-within-Gibbs sampler with automatic convergence checks.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod files;
pub mod model;
pub mod numfmt;
pub mod params;
pub mod posterior;
pub mod prune;
pub mod sampler;
pub mod sim;
pub mod smooth;
pub mod tree;

pub use data::{ColumnSpec, StratumLabels, SurvivalDataset, TimeGrid, TimeUnit};
pub use error::{MrhError, Result};
pub use model::{Hyper, ParameterState, PriorConfig, ShapeSetting};
pub use prune::PruneConfig;
pub use sampler::{ChainStore, FitResult, McmcConfig, ModelSpec};
pub use tree::{MrhTree, SplitId};
