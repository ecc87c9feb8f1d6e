//! Tabular labelled environments.
//!
//! Every environment exposes explicit transition distributions, so the same
//! model serves both sampled rollouts and exhaustive product enumeration.

mod deliver;
mod grid;
mod letter;
mod maze;
mod paint;
mod toy;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::props::PropSet;

pub use deliver::{DeliverConfig, DeliverWorld};
pub use grid::{Dir, GridMap, DIRS};
pub use letter::{LetterEnv, LetterEnvConfig};
pub use maze::TreasureMaze;
pub use paint::PaintWorld;
pub use toy::{ChainMdp, SymbolEmitter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnvState(pub u32);

/// A start state, the label observed when the episode begins, and its probability.
pub type Start = (EnvState, PropSet, f64);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("map line {line}: {message}")]
    Map { line: usize, message: String },
    #[error("bad environment configuration: {0}")]
    BadConfig(String),
}

/// A finite MDP whose transitions are labelled with proposition sets.
pub trait LabeledMdp: Send + Sync {
    fn name(&self) -> &str;
    fn props(&self) -> &[String];
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;

    fn action_name(&self, a: usize) -> String {
        a.to_string()
    }

    fn describe_state(&self, s: EnvState) -> String {
        s.0.to_string()
    }

    /// Sparse distribution over successors; probabilities sum to 1.
    fn transitions(&self, s: EnvState, a: usize) -> Vec<(EnvState, f64)>;

    fn label(&self, s: EnvState, a: usize, next: EnvState) -> PropSet;

    /// Environment-channel reward; zero for every domain but PaintWorld.
    fn reward(&self, _s: EnvState, _a: usize, _next: EnvState) -> f64 {
        0.0
    }

    /// Start distribution for training episodes.
    fn initial_distribution(&self) -> Vec<Start>;

    /// Start distribution for evaluation episodes.
    fn eval_distribution(&self) -> Vec<Start> {
        self.initial_distribution()
    }

    fn horizon(&self) -> usize;

    /// Positive scale used to map episode returns into `[-1, 1]`.
    fn reward_normalizer(&self) -> f64 {
        1.0
    }

    fn sample_next(&self, s: EnvState, a: usize, rng: &mut ChaCha8Rng) -> EnvState {
        sample(&self.transitions(s, a), rng)
    }
}

/// Draws from a sparse distribution; the last entry absorbs rounding slack.
pub fn sample<T: Copy>(dist: &[(T, f64)], rng: &mut ChaCha8Rng) -> T {
    if dist.len() == 1 {
        return dist[0].0;
    }
    let mut u: f64 = rng.gen();
    for &(x, p) in dist {
        if u < p {
            return x;
        }
        u -= p;
    }
    dist.last().expect("empty distribution").0
}

pub fn sample_start(starts: &[Start], rng: &mut ChaCha8Rng) -> (EnvState, PropSet) {
    let weighted: Vec<((EnvState, PropSet), f64)> =
        starts.iter().map(|&(s, l, p)| ((s, l), p)).collect();
    sample(&weighted, rng)
}

pub(crate) fn props_vec(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests;
