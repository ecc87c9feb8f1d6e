use crate::props::PropSet;

use super::{Mode, Pdrm, PdrmError, Pop, StateId, Symbol};

pub const DEFAULT_EPSILON_CAP: usize = 10_000;

/// Runtime pair of machine state and stack.
///
/// The stack is stored bottom-first so that push and pop are O(1); use
/// [`Configuration::stack_top_first`] for the top-first view.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub state: StateId,
    stack: Vec<Symbol>,
    pub terminal: bool,
}

impl Configuration {
    /// Builds a configuration from a top-first stack listing.
    pub fn new(pdrm: &Pdrm, state: StateId, stack_top_first: &[Symbol]) -> Self {
        Configuration {
            state,
            stack: stack_top_first.iter().rev().copied().collect(),
            terminal: pdrm.is_final(state),
        }
    }

    pub fn top(&self) -> Option<Symbol> {
        self.stack.last().copied()
    }

    pub fn stack_len(&self) -> usize {
        self.stack.len()
    }

    pub fn stack_top_first(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.stack.iter().rev().copied()
    }

    pub fn stack_vec(&self) -> Vec<Symbol> {
        self.stack_top_first().collect()
    }

    /// State plus the first `min(k, depth)` stack symbols, top first.
    pub fn top_k_view(&self, k: usize) -> (StateId, Vec<Symbol>) {
        (self.state, self.stack_top_first().take(k).collect())
    }

    fn apply(&mut self, pdrm: &Pdrm, idx: usize) -> f64 {
        let t = &pdrm.transitions[idx];
        if let Pop::Symbol(z) = t.pop {
            let popped = self.stack.pop();
            debug_assert_eq!(popped, Some(z));
        }
        self.stack.extend(t.push.iter().rev());
        self.state = t.target;
        self.terminal = pdrm.is_final(t.target);
        t.reward
    }
}

/// Outcome of a single environment timestep on the machine.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    pub config: Configuration,
    /// Input-transition reward plus all silent-transition rewards.
    pub reward: f64,
    /// Index of the input transition that fired, `None` for an implicit self-loop.
    pub fired: Option<usize>,
    pub epsilon_steps: usize,
}

impl Pdrm {
    /// ε-closure of `⟨u0, [Z]⟩`, with any silent rewards returned as pending.
    pub fn initial_configuration(&self) -> Result<(Configuration, f64), PdrmError> {
        let start = Configuration {
            state: self.initial,
            stack: vec![self.bottom],
            terminal: false,
        };
        let (c, r, _) = self.epsilon_closure(start)?;
        Ok((c, r))
    }

    /// Applies silent transitions until none is applicable or a final state is reached.
    pub fn epsilon_closure(
        &self,
        mut config: Configuration,
    ) -> Result<(Configuration, f64, usize), PdrmError> {
        let mut reward = 0.0;
        let mut n = 0;
        while !config.terminal {
            let Some(&idx) = self.epsilon_candidates(config.state, config.top()).first() else {
                break;
            };
            if n == self.epsilon_cap {
                return Err(PdrmError::EpsilonDivergence {
                    cap: self.epsilon_cap,
                    state: self.state_name(config.state).to_string(),
                });
            }
            reward += config.apply(self, idx);
            n += 1;
        }
        Ok((config, reward, n))
    }

    pub fn step(&self, config: &Configuration, sigma: PropSet) -> Result<(Configuration, f64), PdrmError> {
        self.step_traced(config, sigma).map(|t| (t.config, t.reward))
    }

    /// Like [`Pdrm::step`], also reporting which transition fired.
    pub fn step_traced(&self, config: &Configuration, sigma: PropSet) -> Result<StepTrace, PdrmError> {
        if config.terminal {
            return Err(PdrmError::TerminalStep(
                self.state_name(config.state).to_string(),
            ));
        }
        let Some(idx) = self.lookup(config.state, sigma, config.top()) else {
            return match self.mode {
                Mode::Lenient => Ok(StepTrace {
                    config: config.clone(),
                    reward: 0.0,
                    fired: None,
                    epsilon_steps: 0,
                }),
                Mode::Strict => Err(PdrmError::StrictModeUndefined {
                    state: self.state_name(config.state).to_string(),
                    input: sigma.display(&self.props).to_string(),
                    top: config
                        .top()
                        .map_or("<empty>".to_string(), |z| self.symbol_name(z).to_string()),
                }),
            };
        };
        let mut next = config.clone();
        let r = next.apply(self, idx);
        let (next, r_eps, n) = self.epsilon_closure(next)?;
        Ok(StepTrace {
            config: next,
            reward: r + r_eps,
            fired: Some(idx),
            epsilon_steps: n,
        })
    }

    /// Folds [`Pdrm::step`] over `word`, stopping at a terminal configuration.
    pub fn run_word(&self, word: &[PropSet]) -> Result<(Vec<f64>, Configuration), PdrmError> {
        let (mut config, mut pending) = self.initial_configuration()?;
        let mut trace = Vec::with_capacity(word.len());
        for &sigma in word {
            if config.terminal {
                break;
            }
            let (next, r) = self.step(&config, sigma)?;
            trace.push(r + pending);
            pending = 0.0;
            config = next;
        }
        Ok((trace, config))
    }
}
