//! Identification analysis, conditional maximum likelihood estimation, and
//! simulation for AR(1) dynamic panel logit models whose discrete covariate
//! follows an individual first-order Markov feedback process.
//!
//! The covariate feedback kernel and the individual intercept are nuisance
//! parameters. Conditioning on their sufficient statistic (the outcome count
//! plus transition counts) yields a likelihood free of both; whether a
//! structural parameter survives that conditioning is decided mechanically
//! here by exhaustive enumeration in exact rational arithmetic, and the
//! surviving parameters are estimated by Newton ascent on the conditional
//! log-likelihood.

pub mod cli;
pub mod enumeration;
pub mod estimation;
pub mod identification;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod report;
pub mod simulation;
pub mod stats;

pub use enumeration::{enumerate_paths, partition_blocks, Block};
pub use estimation::{fit_cmle, profile, Component, FitOptions, FitResult};
pub use identification::{
    check_identification, dataset_identification, Criterion, IdentificationReport,
};
pub use likelihood::{
    cond_log_lik, hessian, joint_prob_full, score, CondLikContext, FeedbackKernel,
};
pub use model::{FeedbackSpec, InitialCondition, PanelDataset, Path, Rational, Support, Theta};
pub use simulation::{monte_carlo, simulate_panel, DGPConfig};
pub use stats::{sufficient_statistic, target_stats, SufficientStatistic, TargetStats};
