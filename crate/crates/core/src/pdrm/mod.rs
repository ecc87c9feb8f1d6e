//! Deterministic pushdown reward machines.
//!
//! A machine is first read into a [`PdrmSpec`] (names as written), then
//! [`PdrmSpec::validate`] resolves identifiers, expands `*` pop wildcards and
//! checks determinism exhaustively over every `(state, input, top)` triple.
//! The resulting [`Pdrm`] is immutable; its small-step semantics live in
//! [`exec`].

mod exec;
pub(crate) mod format;

use std::fmt;

use thiserror::Error;

use crate::props::{Guard, GuardError, PropSet, MAX_PROPS};

pub use exec::{Configuration, StepTrace, DEFAULT_EPSILON_CAP};

/// Index into [`Pdrm::state_names`]; working states come first, then finals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

/// Index into [`Pdrm::stack_symbols`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// Undefined `(u, σ, z)` lookups are implicit self-loops with reward 0.
    #[default]
    Lenient,
    /// Undefined lookups are errors.
    Strict,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Epsilon,
    Guard(Guard),
}

impl Input {
    pub fn is_epsilon(&self) -> bool {
        matches!(self, Input::Epsilon)
    }

    pub fn matches(&self, sigma: PropSet) -> bool {
        match self {
            Input::Epsilon => false,
            Input::Guard(g) => g.eval(sigma),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pop {
    Epsilon,
    Symbol(Symbol),
}

impl Pop {
    pub fn symbol(self) -> Option<Symbol> {
        match self {
            Pop::Epsilon => None,
            Pop::Symbol(z) => Some(z),
        }
    }

    /// Whether this pop is applicable with `top` as the topmost symbol.
    pub fn accepts(self, top: Option<Symbol>) -> bool {
        match self {
            Pop::Epsilon => true,
            Pop::Symbol(z) => top == Some(z),
        }
    }
}

/// A validated, concrete transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub source: StateId,
    pub input: Input,
    pub pop: Pop,
    /// Pushed string, new top first.
    pub push: Vec<Symbol>,
    pub reward: f64,
    pub target: StateId,
}

impl Transition {
    /// True when firing leaves state and stack untouched.
    pub fn is_identity(&self) -> bool {
        self.source == self.target
            && match self.pop {
                Pop::Epsilon => self.push.is_empty(),
                Pop::Symbol(z) => self.push == [z],
            }
    }
}

/// Pop field as written: a symbol name, `eps`, or the `*` wildcard.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawPop {
    Epsilon,
    Any,
    Symbol(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawTransition {
    pub source: String,
    /// `None` is a silent transition.
    pub guard: Option<String>,
    pub pop: RawPop,
    pub push: Vec<String>,
    pub reward: f64,
    pub target: String,
    /// 1-based line in the source file, 0 when built programmatically.
    pub line: usize,
}

/// A machine as parsed, before identifier resolution and checking.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PdrmSpec {
    pub name: String,
    pub props: Vec<String>,
    pub states: Vec<String>,
    pub initial: String,
    pub finals: Vec<String>,
    pub stack: Vec<String>,
    pub bottom: String,
    pub mode: Mode,
    pub transitions: Vec<RawTransition>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdrmError {
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
    #[error("nondeterministic transitions {first} and {second} at state `{state}`, input {input}, top `{top}`")]
    NondeterministicPair {
        first: usize,
        second: usize,
        state: String,
        input: String,
        top: String,
    },
    #[error("state `{0}` declared both as working and final state")]
    FinalStateOverlap(String),
    #[error("transition on line {line} leaves final state `{state}`")]
    FinalSource { line: usize, state: String },
    #[error("empty {0}")]
    EmptyAlphabet(&'static str),
    #[error("{0} propositions exceed the supported maximum of {MAX_PROPS}")]
    TooManyProps(usize),
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("no transition defined at state `{state}` for input {input} with top `{top}` (strict mode)")]
    StrictModeUndefined {
        state: String,
        input: String,
        top: String,
    },
    #[error("epsilon closure exceeded {cap} steps from state `{state}`")]
    EpsilonDivergence { cap: usize, state: String },
    #[error("step from terminal configuration in state `{0}`")]
    TerminalStep(String),
}

/// A validated deterministic pushdown reward machine.
#[derive(Clone, Debug)]
pub struct Pdrm {
    name: String,
    props: Vec<String>,
    state_names: Vec<String>,
    n_working: usize,
    initial: StateId,
    stack_symbols: Vec<String>,
    bottom: Symbol,
    mode: Mode,
    transitions: Vec<Transition>,
    epsilon_cap: usize,
    // `[state * (n_sym + 1) + top]`, where `top == n_sym` is the empty stack.
    input_index: Vec<Vec<usize>>,
    epsilon_index: Vec<Vec<usize>>,
}

impl PartialEq for Pdrm {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.props == other.props
            && self.state_names == other.state_names
            && self.n_working == other.n_working
            && self.initial == other.initial
            && self.stack_symbols == other.stack_symbols
            && self.bottom == other.bottom
            && self.mode == other.mode
            && self.transitions == other.transitions
    }
}

impl Pdrm {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s.0 as usize]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.state_names
            .iter()
            .position(|n| n == name)
            .map(|i| StateId(i as u32))
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_working_states(&self) -> usize {
        self.n_working
    }

    pub fn is_final(&self, s: StateId) -> bool {
        s.0 as usize >= self.n_working
    }

    pub fn initial_state(&self) -> StateId {
        self.initial
    }

    pub fn stack_symbols(&self) -> &[String] {
        &self.stack_symbols
    }

    pub fn symbol(&self, name: &str) -> Option<Symbol> {
        self.stack_symbols
            .iter()
            .position(|n| n == name)
            .map(|i| Symbol(i as u16))
    }

    pub fn symbol_name(&self, z: Symbol) -> &str {
        &self.stack_symbols[z.0 as usize]
    }

    pub fn bottom(&self) -> Symbol {
        self.bottom
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn epsilon_cap(&self) -> usize {
        self.epsilon_cap
    }

    pub fn with_epsilon_cap(mut self, cap: usize) -> Self {
        self.epsilon_cap = cap;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// Resolves a list of proposition names into an input symbol.
    pub fn label(&self, names: &[&str]) -> Result<PropSet, GuardError> {
        PropSet::from_names(names, &self.props)
    }

    /// Maximum number of symbols pushed by a single transition (`m`).
    pub fn max_push_len(&self) -> usize {
        self.transitions.iter().map(|t| t.push.len()).max().unwrap_or(0)
    }

    /// Longest number of pushing silent transitions in one ε-sequence (`e`).
    /// `None` when the silent-transition graph has a cycle, in which case no
    /// static bound exists.
    pub fn max_pushing_epsilon_chain(&self) -> Option<usize> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done(usize),
        }
        fn visit(m: &Pdrm, s: usize, marks: &mut [Mark]) -> Option<usize> {
            match marks[s] {
                Mark::Done(v) => return Some(v),
                Mark::Active => return None,
                Mark::New => {}
            }
            marks[s] = Mark::Active;
            let mut best = 0;
            for t in m
                .transitions
                .iter()
                .filter(|t| t.source.0 as usize == s && t.input.is_epsilon())
            {
                let tail = if m.is_final(t.target) {
                    0
                } else {
                    visit(m, t.target.0 as usize, marks)?
                };
                best = best.max(tail + usize::from(!t.push.is_empty()));
            }
            marks[s] = Mark::Done(best);
            Some(best)
        }
        let mut marks = vec![Mark::New; self.n_working];
        let mut e = 0;
        for s in 0..self.n_working {
            e = e.max(visit(self, s, &mut marks)?);
        }
        Some(e)
    }

    fn slot(&self, state: StateId, top: Option<Symbol>) -> usize {
        let width = self.stack_symbols.len() + 1;
        let top = top.map_or(self.stack_symbols.len(), |z| z.0 as usize);
        state.0 as usize * width + top
    }

    /// Transitions reading an input that are applicable at `(state, top)`.
    pub fn input_candidates(&self, state: StateId, top: Option<Symbol>) -> &[usize] {
        &self.input_index[self.slot(state, top)]
    }

    /// Silent transitions applicable at `(state, top)`; at most one after validation.
    pub fn epsilon_candidates(&self, state: StateId, top: Option<Symbol>) -> &[usize] {
        &self.epsilon_index[self.slot(state, top)]
    }

    /// The unique input transition applicable at `(state, σ, top)`, if any.
    pub fn lookup(&self, state: StateId, sigma: PropSet, top: Option<Symbol>) -> Option<usize> {
        self.input_candidates(state, top)
            .iter()
            .copied()
            .find(|&i| self.transitions[i].input.matches(sigma))
    }

    /// Converts back to the as-parsed form (with concrete pops only).
    pub fn to_spec(&self) -> PdrmSpec {
        let sym = |z: Symbol| self.stack_symbols[z.0 as usize].clone();
        PdrmSpec {
            name: self.name.clone(),
            props: self.props.clone(),
            states: self.state_names[..self.n_working].to_vec(),
            initial: self.state_name(self.initial).to_string(),
            finals: self.state_names[self.n_working..].to_vec(),
            stack: self.stack_symbols.clone(),
            bottom: sym(self.bottom),
            mode: self.mode,
            transitions: self
                .transitions
                .iter()
                .map(|t| RawTransition {
                    source: self.state_name(t.source).to_string(),
                    guard: match &t.input {
                        Input::Epsilon => None,
                        Input::Guard(g) => Some(g.display(&self.props).to_string()),
                    },
                    pop: match t.pop {
                        Pop::Epsilon => RawPop::Epsilon,
                        Pop::Symbol(z) => RawPop::Symbol(sym(z)),
                    },
                    push: t.push.iter().map(|&z| sym(z)).collect(),
                    reward: t.reward,
                    target: self.state_name(t.target).to_string(),
                    line: 0,
                })
                .collect(),
        }
    }

    pub fn describe_transition(&self, i: usize) -> String {
        let t = &self.transitions[i];
        let input = match &t.input {
            Input::Epsilon => "eps".to_string(),
            Input::Guard(g) => g.display(&self.props).to_string(),
        };
        let pop = match t.pop {
            Pop::Epsilon => "eps",
            Pop::Symbol(z) => self.symbol_name(z),
        };
        let push = if t.push.is_empty() {
            "eps".to_string()
        } else {
            t.push
                .iter()
                .map(|&z| self.symbol_name(z))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "{} | {} | {} | {} | {} | {}",
            self.state_name(t.source),
            input,
            pop,
            push,
            t.reward,
            self.state_name(t.target)
        )
    }
}

impl fmt::Display for Pdrm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_spec().to_text())
    }
}

impl PdrmSpec {
    /// Resolves identifiers, expands wildcards and checks determinism.
    pub fn validate(&self) -> Result<Pdrm, PdrmError> {
        if self.props.is_empty() {
            return Err(PdrmError::EmptyAlphabet("proposition set"));
        }
        if self.props.len() > MAX_PROPS {
            return Err(PdrmError::TooManyProps(self.props.len()));
        }
        if self.stack.is_empty() {
            return Err(PdrmError::EmptyAlphabet("stack alphabet"));
        }
        if self.states.is_empty() {
            return Err(PdrmError::EmptyAlphabet("state set"));
        }
        check_unique("proposition", &self.props)?;
        check_unique("stack symbol", &self.stack)?;
        check_unique("state", &self.states)?;
        check_unique("final state", &self.finals)?;
        if let Some(f) = self.finals.iter().find(|f| self.states.contains(f)) {
            return Err(PdrmError::FinalStateOverlap(f.clone()));
        }
        let state_names: Vec<String> = self.states.iter().chain(&self.finals).cloned().collect();
        let n_working = self.states.len();
        let state = |name: &str| -> Result<StateId, PdrmError> {
            state_names
                .iter()
                .position(|n| n == name)
                .map(|i| StateId(i as u32))
                .ok_or_else(|| PdrmError::UnknownIdentifier {
                    kind: "state",
                    name: name.to_string(),
                })
        };
        let symbol = |name: &str| -> Result<Symbol, PdrmError> {
            self.stack
                .iter()
                .position(|n| n == name)
                .map(|i| Symbol(i as u16))
                .ok_or_else(|| PdrmError::UnknownIdentifier {
                    kind: "stack symbol",
                    name: name.to_string(),
                })
        };
        let initial = state(&self.initial)?;
        if initial.0 as usize >= n_working {
            return Err(PdrmError::UnknownIdentifier {
                kind: "working state",
                name: self.initial.clone(),
            });
        }
        let bottom = symbol(&self.bottom)?;

        let mut transitions = Vec::new();
        for raw in &self.transitions {
            let source = state(&raw.source)?;
            if source.0 as usize >= n_working {
                return Err(PdrmError::FinalSource {
                    line: raw.line,
                    state: raw.source.clone(),
                });
            }
            let target = state(&raw.target)?;
            let input = match &raw.guard {
                None => Input::Epsilon,
                Some(text) => Input::Guard(Guard::parse(text, &self.props).map_err(|e| match e {
                    GuardError::UnknownProp(name) => PdrmError::UnknownIdentifier {
                        kind: "proposition",
                        name,
                    },
                    other => PdrmError::BadGuard {
                        line: raw.line,
                        source: other,
                    },
                })?),
            };
            let push = raw
                .push
                .iter()
                .map(|s| symbol(s))
                .collect::<Result<Vec<_>, _>>()?;
            let pops = match &raw.pop {
                RawPop::Epsilon => vec![Pop::Epsilon],
                RawPop::Symbol(s) => vec![Pop::Symbol(symbol(s)?)],
                RawPop::Any => (0..self.stack.len())
                    .map(|i| Pop::Symbol(Symbol(i as u16)))
                    .collect(),
            };
            for pop in pops {
                transitions.push(Transition {
                    source,
                    input: input.clone(),
                    pop,
                    push: push.clone(),
                    reward: raw.reward,
                    target,
                });
            }
        }

        let mut m = Pdrm {
            name: self.name.clone(),
            props: self.props.clone(),
            state_names,
            n_working,
            initial,
            stack_symbols: self.stack.clone(),
            bottom,
            mode: self.mode,
            transitions,
            epsilon_cap: DEFAULT_EPSILON_CAP,
            input_index: Vec::new(),
            epsilon_index: Vec::new(),
        };
        m.build_index();
        m.check_determinism()?;
        Ok(m)
    }
}

fn check_unique(kind: &'static str, names: &[String]) -> Result<(), PdrmError> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(PdrmError::Duplicate {
                kind,
                name: n.clone(),
            });
        }
    }
    Ok(())
}

impl Pdrm {
    fn build_index(&mut self) {
        let n_sym = self.stack_symbols.len();
        let slots = self.state_names.len() * (n_sym + 1);
        self.input_index = vec![Vec::new(); slots];
        self.epsilon_index = vec![Vec::new(); slots];
        for (i, t) in self.transitions.iter().enumerate() {
            let tops: Vec<Option<Symbol>> = match t.pop {
                Pop::Symbol(z) => vec![Some(z)],
                Pop::Epsilon => (0..n_sym)
                    .map(|z| Some(Symbol(z as u16)))
                    .chain(std::iter::once(None))
                    .collect(),
            };
            for top in tops {
                let slot = self.slot(t.source, top);
                if t.input.is_epsilon() {
                    self.epsilon_index[slot].push(i);
                } else {
                    self.input_index[slot].push(i);
                }
            }
        }
    }

    /// Exhaustive check over every working state, stack top (including the
    /// empty stack) and every input symbol in `2^AP`.
    fn check_determinism(&self) -> Result<(), PdrmError> {
        let n_sigma = 1u64 << self.props.len();
        let n_sym = self.stack_symbols.len();
        let tops = (0..n_sym)
            .map(|z| Some(Symbol(z as u16)))
            .chain(std::iter::once(None));
        let top_name = |top: Option<Symbol>| match top {
            Some(z) => self.symbol_name(z).to_string(),
            None => "<empty>".to_string(),
        };
        for top in tops {
            for u in 0..self.n_working {
                let state = StateId(u as u32);
                let eps = self.epsilon_candidates(state, top);
                let inputs = self.input_candidates(state, top);
                if eps.len() > 1 {
                    return Err(PdrmError::NondeterministicPair {
                        first: eps[0],
                        second: eps[1],
                        state: self.state_name(state).to_string(),
                        input: "eps".into(),
                        top: top_name(top),
                    });
                }
                if inputs.is_empty() {
                    continue;
                }
                for sigma in 0..n_sigma {
                    let sigma = PropSet(sigma);
                    let mut matching = inputs
                        .iter()
                        .copied()
                        .filter(|&i| self.transitions[i].input.matches(sigma));
                    let Some(first) = matching.next() else {
                        continue;
                    };
                    let second = eps.first().copied().or_else(|| matching.next());
                    if let Some(second) = second {
                        return Err(PdrmError::NondeterministicPair {
                            first: first.min(second),
                            second: first.max(second),
                            state: self.state_name(state).to_string(),
                            input: sigma.display(&self.props).to_string(),
                            top: top_name(top),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
