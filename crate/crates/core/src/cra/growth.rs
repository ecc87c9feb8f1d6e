use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::props::PropSet;

use super::{Cra, CraConfig, CraError};

/// Anything with counters that can be stepped on labels; lets counter-growth
/// measurement and the learning layer treat plain automata and the
/// path-encoding automaton uniformly.
pub trait CountingMachine: Send + Sync {
    type Config: Clone + Eq + std::hash::Hash + std::fmt::Debug + Send + Sync;

    fn start(&self) -> Self::Config;
    fn advance(&self, config: &Self::Config, sigma: PropSet) -> Result<(Self::Config, f64), CraError>;
    fn is_terminal(&self, config: &Self::Config) -> bool;
    fn max_counter(&self, config: &Self::Config) -> BigUint;
}

impl CountingMachine for Cra {
    type Config = CraConfig;

    fn start(&self) -> CraConfig {
        self.initial_configuration()
    }

    fn advance(&self, config: &CraConfig, sigma: PropSet) -> Result<(CraConfig, f64), CraError> {
        self.step(config, sigma)
    }

    fn is_terminal(&self, config: &CraConfig) -> bool {
        config.terminal
    }

    fn max_counter(&self, config: &CraConfig) -> BigUint {
        BigUint::from(config.counters.iter().copied().max().unwrap_or(0))
    }
}

/// Running maximum counter value after each input symbol.
pub fn measure_counter_growth<M: CountingMachine>(
    machine: &M,
    word: &[PropSet],
) -> Result<Vec<BigUint>, CraError> {
    let mut config = machine.start();
    let mut best = machine.max_counter(&config);
    let mut out = Vec::with_capacity(word.len());
    for &sigma in word {
        if machine.is_terminal(&config) {
            break;
        }
        config = machine.advance(&config, sigma)?.0;
        best = best.max(machine.max_counter(&config));
        out.push(best.clone());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PathPhase {
    /// Walking towards the treasure, recording moves.
    Outbound,
    /// Retracing the recorded path in reverse.
    Return,
    Won,
    Lost,
    /// The operation budget ran out.
    Exhausted,
}

/// Configuration of [`PathEncodingCra`]: the path as a base-4 number and its
/// length, plus the cumulative number of unit counter operations.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathConfig {
    pub phase: PathPhase,
    pub encoding: BigUint,
    pub length: u64,
    pub unit_ops: BigUint,
}

/// Two-counter automaton for the treasure-maze task.
///
/// Moves `u, d, l, r` are digits `0..=3`; the move at step `i` adds
/// `digit * 4^i` to the encoding. Arithmetic is done directly on big
/// integers, while `unit_ops` counts the unit increments and decrements an
/// actual counter machine would perform. When it exceeds `op_budget` the
/// episode ends with reward 0.
#[derive(Clone, Debug)]
pub struct PathEncodingCra {
    dirs: [usize; 4],
    treasure: usize,
    exit: usize,
    op_budget: Option<BigUint>,
}

impl PathEncodingCra {
    /// Looks up `u d l r t x` in `props`.
    pub fn new(props: &[String], op_budget: Option<u64>) -> Result<Self, CraError> {
        let find = |name: &str| {
            props
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| CraError::UnknownIdentifier {
                    kind: "proposition",
                    name: name.to_string(),
                })
        };
        Ok(PathEncodingCra {
            dirs: [find("u")?, find("d")?, find("l")?, find("r")?],
            treasure: find("t")?,
            exit: find("x")?,
            op_budget: op_budget.map(BigUint::from),
        })
    }

    fn direction(&self, sigma: PropSet) -> Option<u64> {
        self.dirs
            .iter()
            .position(|&p| sigma.contains(p))
            .map(|d| d as u64)
    }

    fn over_budget(&self, ops: &BigUint) -> bool {
        self.op_budget.as_ref().is_some_and(|b| ops > b)
    }
}

fn opposite(d: u64) -> u64 {
    d ^ 1
}

impl CountingMachine for PathEncodingCra {
    type Config = PathConfig;

    fn start(&self) -> PathConfig {
        PathConfig {
            phase: PathPhase::Outbound,
            encoding: BigUint::zero(),
            length: 0,
            unit_ops: BigUint::zero(),
        }
    }

    fn advance(&self, config: &PathConfig, sigma: PropSet) -> Result<(PathConfig, f64), CraError> {
        let Some(dir) = self.direction(sigma) else {
            return Ok((config.clone(), 0.0));
        };
        let mut next = config.clone();
        let mut reward = 0.0;
        match config.phase {
            PathPhase::Outbound => {
                let added = BigUint::from(dir) << (2 * config.length);
                next.encoding += &added;
                next.unit_ops += added.max(BigUint::one());
                next.length += 1;
                if sigma.contains(self.treasure) {
                    next.phase = PathPhase::Return;
                }
            }
            PathPhase::Return => {
                if config.length == 0 {
                    return Ok((config.clone(), 0.0));
                }
                let shift = 2 * (config.length - 1);
                let top = (&config.encoding >> shift).to_u64().unwrap_or(0) & 3;
                let removed = BigUint::from(top) << shift;
                next.encoding -= &removed;
                next.unit_ops += removed.max(BigUint::one());
                next.length -= 1;
                if dir != opposite(top) {
                    next.phase = PathPhase::Lost;
                    reward = -1.0;
                } else if sigma.contains(self.exit) {
                    next.phase = PathPhase::Won;
                    reward = 1.0;
                }
            }
            PathPhase::Won | PathPhase::Lost | PathPhase::Exhausted => {
                return Err(CraError::TerminalStep(format!("{:?}", config.phase)))
            }
        }
        if matches!(next.phase, PathPhase::Return | PathPhase::Outbound) && self.over_budget(&next.unit_ops) {
            next.phase = PathPhase::Exhausted;
        }
        Ok((next, reward))
    }

    fn is_terminal(&self, config: &PathConfig) -> bool {
        matches!(
            config.phase,
            PathPhase::Won | PathPhase::Lost | PathPhase::Exhausted
        )
    }

    fn max_counter(&self, config: &PathConfig) -> BigUint {
        config.encoding.clone().max(BigUint::from(config.length))
    }
}
