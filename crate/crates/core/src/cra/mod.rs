//! Counting reward automata: finite-state machines with non-negative integer
//! counters, zero-tested on every transition and updated by constant deltas.
//!
//! One-counter machines translate to pushdown reward machines with
//! [`translate_cra_to_pdrm`]; [`check_reward_equivalence`] compares the two
//! on sampled words.

mod equiv;
mod format;
mod growth;
mod translate;

use thiserror::Error;

use crate::pdrm::PdrmError;
use crate::props::{Guard, GuardError, PropSet, MAX_PROPS};

pub use equiv::{check_reward_equivalence, random_one_counter_cra, random_words, EquivalenceReport, Mismatch};
pub use growth::{measure_counter_growth, CountingMachine, PathConfig, PathEncodingCra, PathPhase};
pub use translate::translate_cra_to_pdrm;

/// Counter-machine zero tests are enumerated exhaustively during validation.
pub const MAX_COUNTERS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CraState(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub struct CraTransition {
    pub source: CraState,
    pub guard: Guard,
    /// `true` requires the counter to be nonzero, `false` requires zero.
    pub zero_test: Vec<bool>,
    pub deltas: Vec<i64>,
    pub reward: f64,
    pub target: CraState,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CraConfig {
    pub state: CraState,
    pub counters: Vec<u64>,
    pub terminal: bool,
}

impl CraConfig {
    pub fn indicator(&self) -> Vec<bool> {
        self.counters.iter().map(|&c| c != 0).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CraError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown {kind} `{name}`")]
    UnknownIdentifier { kind: &'static str, name: String },
    #[error("line {line}: {source}")]
    BadGuard {
        line: usize,
        #[source]
        source: GuardError,
    },
    #[error("nondeterministic transitions {first} and {second} at state `{state}`, input {input}, zero test {zero_test}")]
    Nondeterministic {
        first: usize,
        second: usize,
        state: String,
        input: String,
        zero_test: String,
    },
    #[error("state `{0}` declared both as working and final state")]
    FinalStateOverlap(String),
    #[error("transition on line {line} leaves final state `{state}`")]
    FinalSource { line: usize, state: String },
    #[error("empty {0}")]
    EmptyAlphabet(&'static str),
    #[error("{0} propositions exceed the supported maximum of {MAX_PROPS}")]
    TooManyProps(usize),
    #[error("counter count must be in 1..={MAX_COUNTERS}, got {0}")]
    BadCounterCount(usize),
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("counter {counter} would become negative ({value} {delta:+})")]
    NegativeCounter { counter: usize, value: u64, delta: i64 },
    #[error("only one-counter automata can be translated, this one has {0}")]
    MultiCounterUnsupported(usize),
    #[error("step from terminal configuration in state `{0}`")]
    TerminalStep(String),
    #[error("translated machine is invalid: {0}")]
    Translation(PdrmError),
}

/// A validated counting reward automaton.
#[derive(Clone, Debug, PartialEq)]
pub struct Cra {
    name: String,
    props: Vec<String>,
    state_names: Vec<String>,
    n_working: usize,
    initial: CraState,
    n_counters: usize,
    transitions: Vec<CraTransition>,
}

/// Unvalidated transition, names as written.
#[derive(Clone, Debug, PartialEq)]
pub struct RawCraTransition {
    pub source: String,
    pub guard: String,
    pub zero_test: Vec<bool>,
    pub deltas: Vec<i64>,
    pub reward: f64,
    pub target: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CraSpec {
    pub name: String,
    pub props: Vec<String>,
    pub states: Vec<String>,
    pub initial: String,
    pub finals: Vec<String>,
    pub n_counters: usize,
    pub transitions: Vec<RawCraTransition>,
}

impl Cra {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_name(&self, s: CraState) -> &str {
        &self.state_names[s.0 as usize]
    }

    pub fn state_id(&self, name: &str) -> Option<CraState> {
        self.state_names
            .iter()
            .position(|n| n == name)
            .map(|i| CraState(i as u32))
    }

    pub fn n_working_states(&self) -> usize {
        self.n_working
    }

    pub fn is_final(&self, s: CraState) -> bool {
        s.0 as usize >= self.n_working
    }

    pub fn initial_state(&self) -> CraState {
        self.initial
    }

    pub fn n_counters(&self) -> usize {
        self.n_counters
    }

    pub fn transitions(&self) -> &[CraTransition] {
        &self.transitions
    }

    pub fn label(&self, names: &[&str]) -> Result<PropSet, GuardError> {
        PropSet::from_names(names, &self.props)
    }

    pub fn initial_configuration(&self) -> CraConfig {
        CraConfig {
            state: self.initial,
            counters: vec![0; self.n_counters],
            terminal: false,
        }
    }

    /// The unique transition applicable at `(state, σ, 𝟙(counters))`.
    pub fn lookup(&self, state: CraState, sigma: PropSet, indicator: &[bool]) -> Option<usize> {
        self.transitions.iter().position(|t| {
            t.source == state && t.zero_test == indicator && t.guard.eval(sigma)
        })
    }

    /// One input step. Missing transitions are self-loops with reward 0.
    pub fn step(&self, config: &CraConfig, sigma: PropSet) -> Result<(CraConfig, f64), CraError> {
        if config.terminal {
            return Err(CraError::TerminalStep(self.state_name(config.state).to_string()));
        }
        let Some(idx) = self.lookup(config.state, sigma, &config.indicator()) else {
            return Ok((config.clone(), 0.0));
        };
        let t = &self.transitions[idx];
        let mut counters = config.counters.clone();
        for (i, (c, &d)) in counters.iter_mut().zip(&t.deltas).enumerate() {
            let next = *c as i128 + d as i128;
            if next < 0 {
                return Err(CraError::NegativeCounter {
                    counter: i,
                    value: *c,
                    delta: d,
                });
            }
            *c = next as u64;
        }
        Ok((
            CraConfig {
                state: t.target,
                counters,
                terminal: self.is_final(t.target),
            },
            t.reward,
        ))
    }

    /// Folds [`Cra::step`] over `word`, stopping at a terminal configuration.
    pub fn run_word(&self, word: &[PropSet]) -> Result<(Vec<f64>, CraConfig), CraError> {
        let mut config = self.initial_configuration();
        let mut trace = Vec::with_capacity(word.len());
        for &sigma in word {
            if config.terminal {
                break;
            }
            let (next, r) = self.step(&config, sigma)?;
            trace.push(r);
            config = next;
        }
        Ok((trace, config))
    }

    pub fn to_spec(&self) -> CraSpec {
        CraSpec {
            name: self.name.clone(),
            props: self.props.clone(),
            states: self.state_names[..self.n_working].to_vec(),
            initial: self.state_name(self.initial).to_string(),
            finals: self.state_names[self.n_working..].to_vec(),
            n_counters: self.n_counters,
            transitions: self
                .transitions
                .iter()
                .map(|t| RawCraTransition {
                    source: self.state_name(t.source).to_string(),
                    guard: t.guard.display(&self.props).to_string(),
                    zero_test: t.zero_test.clone(),
                    deltas: t.deltas.clone(),
                    reward: t.reward,
                    target: self.state_name(t.target).to_string(),
                    line: 0,
                })
                .collect(),
        }
    }
}

/// Free-function form of [`Cra::step`].
pub fn cra_step(cra: &Cra, config: &CraConfig, sigma: PropSet) -> Result<(CraConfig, f64), CraError> {
    cra.step(config, sigma)
}

fn check_unique(kind: &'static str, names: &[String]) -> Result<(), CraError> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(CraError::Duplicate {
                kind,
                name: n.clone(),
            });
        }
    }
    Ok(())
}

impl CraSpec {
    pub fn validate(&self) -> Result<Cra, CraError> {
        if self.props.is_empty() {
            return Err(CraError::EmptyAlphabet("proposition set"));
        }
        if self.props.len() > MAX_PROPS {
            return Err(CraError::TooManyProps(self.props.len()));
        }
        if self.states.is_empty() {
            return Err(CraError::EmptyAlphabet("state set"));
        }
        if self.n_counters == 0 || self.n_counters > MAX_COUNTERS {
            return Err(CraError::BadCounterCount(self.n_counters));
        }
        check_unique("proposition", &self.props)?;
        check_unique("state", &self.states)?;
        check_unique("final state", &self.finals)?;
        if let Some(f) = self.finals.iter().find(|f| self.states.contains(f)) {
            return Err(CraError::FinalStateOverlap(f.clone()));
        }
        let state_names: Vec<String> = self.states.iter().chain(&self.finals).cloned().collect();
        let n_working = self.states.len();
        let state = |name: &str| {
            state_names
                .iter()
                .position(|n| n == name)
                .map(|i| CraState(i as u32))
                .ok_or_else(|| CraError::UnknownIdentifier {
                    kind: "state",
                    name: name.to_string(),
                })
        };
        let initial = state(&self.initial)?;
        if initial.0 as usize >= n_working {
            return Err(CraError::UnknownIdentifier {
                kind: "working state",
                name: self.initial.clone(),
            });
        }
        let mut transitions = Vec::with_capacity(self.transitions.len());
        for raw in &self.transitions {
            let source = state(&raw.source)?;
            if source.0 as usize >= n_working {
                return Err(CraError::FinalSource {
                    line: raw.line,
                    state: raw.source.clone(),
                });
            }
            if raw.zero_test.len() != self.n_counters || raw.deltas.len() != self.n_counters {
                return Err(CraError::Parse {
                    line: raw.line,
                    message: format!(
                        "zero test and deltas must have {} entries",
                        self.n_counters
                    ),
                });
            }
            let guard = Guard::parse(&raw.guard, &self.props).map_err(|e| match e {
                GuardError::UnknownProp(name) => CraError::UnknownIdentifier {
                    kind: "proposition",
                    name,
                },
                other => CraError::BadGuard {
                    line: raw.line,
                    source: other,
                },
            })?;
            transitions.push(CraTransition {
                source,
                guard,
                zero_test: raw.zero_test.clone(),
                deltas: raw.deltas.clone(),
                reward: raw.reward,
                target: state(&raw.target)?,
            });
        }
        let cra = Cra {
            name: self.name.clone(),
            props: self.props.clone(),
            state_names,
            n_working,
            initial,
            n_counters: self.n_counters,
            transitions,
        };
        cra.check_determinism()?;
        Ok(cra)
    }
}

impl Cra {
    fn check_determinism(&self) -> Result<(), CraError> {
        let n_sigma = 1u64 << self.props.len();
        for u in 0..self.n_working {
            let state = CraState(u as u32);
            let here: Vec<usize> = (0..self.transitions.len())
                .filter(|&i| self.transitions[i].source == state)
                .collect();
            for (a, &i) in here.iter().enumerate() {
                for &j in &here[a + 1..] {
                    let (ti, tj) = (&self.transitions[i], &self.transitions[j]);
                    if ti.zero_test != tj.zero_test {
                        continue;
                    }
                    if let Some(sigma) = (0..n_sigma)
                        .map(PropSet)
                        .find(|&s| ti.guard.eval(s) && tj.guard.eval(s))
                    {
                        return Err(CraError::Nondeterministic {
                            first: i,
                            second: j,
                            state: self.state_name(state).to_string(),
                            input: sigma.display(&self.props).to_string(),
                            zero_test: format::zero_test_text(&ti.zero_test),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
