//! Censored semi-bandits.
//!
//! A learner spreads a divisible budget over `K` arms each round. Arm `i`
//! loses with probability `mu_i`, but only when its share is below its
//! threshold `theta_i`, and only exposed losses are observed. Learners
//! first locate the thresholds by noisy binary search and then run
//! Thompson sampling over which arms to leave uncovered.
//!
//! - [`problem`]: instances, the censoring environment, pseudo-regret.
//! - [`knapsack`]: optimal covers and threshold-equivalence helpers.
//! - [`estimation`]: the two threshold searches.
//! - [`policies`]: complete learners and their building blocks.
//! - [`harness`]: replicated experiments and their outputs.

// `!(x > 0.0)` style range checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod harness;
pub mod knapsack;
pub mod policies;
pub mod problem;
pub mod rng;

pub use error::{CsbError, Result};
pub use problem::{
    environment_step, optimal_allocation, round_regret, Allocation, CsbInstance, Feedback,
    OptimalCover, RegretTrace, Threshold,
};
pub use rng::ReplicationRng;
