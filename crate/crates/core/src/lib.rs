//! Adaptive domain randomization: PPO policies trained under a Gaussian
//! distribution of simulator parameters, with the distribution refit by
//! KL-bounded relative entropy policy search against trajectories observed in
//! a target system.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod discrepancy;
pub mod envs;
pub mod error;
pub mod harness;
pub mod oracles;
pub mod parallel;
pub mod param_space;
pub mod policy;
pub mod ppo;
pub mod reps;
pub mod rng;
pub mod simopt;

pub use error::{Error, Result};
