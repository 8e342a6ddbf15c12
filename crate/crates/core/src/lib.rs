//! Latent-space adjusted estimation of social influence.
//!
//! Fit a logistic latent-distance model to each wave's friendship network,
//! extract the latent positions, and add them as covariates to a dynamic
//! linear-in-means influence regression. Simulation and Monte Carlo tools
//! show how the adjustment changes the influence estimate when an unobserved
//! trait drives both tie formation and behavior.

pub mod cli;
pub mod influence;
pub mod io;
pub mod lsm;
pub mod seed;
pub mod sim;
pub mod study;
