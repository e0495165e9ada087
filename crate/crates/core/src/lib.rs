//! Core library for `epictrl`: a compartmental HIV transmission simulator
//! for multi-jurisdiction regions, a yearly decision-process wrapper over
//! it, and a small self-contained PPO stack (feed-forward networks,
//! adaptive-moment optimizer, clipped-surrogate updates) for training
//! per-jurisdiction or pooled intervention policies.
//!
//! Layering, bottom to top:
//!
//! - [`epi`]: compartments, mixing, force of infection, yearly integration.
//! - [`scenario`]: JSON scenario configs, validation, built-in templates.
//! - [`env`]: observations, proportion-change actions, costs, rewards.
//! - [`nn`]: feed-forward networks, gradients, optimizer, checkpoints.
//! - [`ppo`]: bounded stochastic policy, advantage estimation, updates.
//! - [`trainer`]: episode orchestration, evaluation, mode comparisons.

pub mod env;
pub mod epi;
pub mod error;
pub mod logging;
pub mod nn;
pub mod ppo;
pub mod scenario;
pub mod trainer;
