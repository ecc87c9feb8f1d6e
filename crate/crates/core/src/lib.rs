//! Pushdown reward machines for reinforcement learning.
//!
//! - [`pdrm`]: deterministic pushdown reward machines and their semantics.
//! - [`cra`]: counting reward automata and their translation to pdRMs.
//! - [`env`]: labelled grid environments.
//! - [`product`]: environment x machine products, rollouts and bounded enumeration.
//! - [`learn`]: tabular Q-learning and the option-based hierarchical learner.
//! - [`analysis`]: value iteration, k-stack checks and blowup counting.
//! - [`harness`]: experiment configs, seeded runs and plot data.

pub mod cra;
pub mod machines;
pub mod pdrm;
pub mod props;
pub mod env;
pub mod product;
pub mod learn;
pub mod analysis;
pub mod harness;
