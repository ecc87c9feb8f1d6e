use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::pdrm::Pdrm;
use crate::props::PropSet;

use super::{Cra, CraError, CraSpec, RawCraTransition};

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub word_index: usize,
    pub word: Vec<PropSet>,
    pub cra_trace: Vec<f64>,
    pub pdrm_trace: Vec<f64>,
    /// Set when the pdRM raised an error instead of producing a trace.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    /// Seed of the word generator, when the words were sampled.
    pub seed: Option<u64>,
    pub n_words: usize,
    pub n_equal: usize,
    /// Words on which the automaton would drive its counter negative; these
    /// are compared only on the prefix before the offending step.
    pub n_truncated: usize,
    pub mismatches: Vec<Mismatch>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn merge(mut self, other: EquivalenceReport) -> EquivalenceReport {
        let offset = self.n_words;
        self.n_words += other.n_words;
        self.n_equal += other.n_equal;
        self.n_truncated += other.n_truncated;
        self.mismatches.extend(other.mismatches.into_iter().map(|mut m| {
            m.word_index += offset;
            m
        }));
        self
    }
}

/// Words of length `0..=max_len`, each letter uniform over the empty label and
/// the singleton labels of `props`.
pub fn random_words(n_props: usize, n_words: usize, max_len: usize, seed: u64) -> Vec<Vec<PropSet>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letters: Vec<PropSet> = std::iter::once(PropSet::EMPTY)
        .chain((0..n_props).map(PropSet::singleton))
        .collect();
    (0..n_words)
        .map(|_| {
            let len = rng.gen_range(0..=max_len);
            (0..len).map(|_| *letters.choose(&mut rng).unwrap()).collect()
        })
        .collect()
}

fn remap(sigma: PropSet, from: &[String], to: &[String]) -> PropSet {
    sigma
        .iter()
        .filter_map(|i| to.iter().position(|p| *p == from[i]))
        .fold(PropSet::EMPTY, PropSet::with)
}

enum Outcome {
    Equal { truncated: bool },
    Differ(Mismatch),
}

fn compare_one(cra: &Cra, pdrm: &Pdrm, index: usize, word: &[PropSet]) -> Outcome {
    let mut cra_trace = Vec::with_capacity(word.len());
    let mut config = cra.initial_configuration();
    let mut truncated = false;
    for &sigma in word {
        if config.terminal {
            break;
        }
        match cra.step(&config, sigma) {
            Ok((next, r)) => {
                cra_trace.push(r);
                config = next;
            }
            Err(CraError::NegativeCounter { .. }) => {
                truncated = true;
                break;
            }
            Err(e) => {
                return Outcome::Differ(Mismatch {
                    word_index: index,
                    word: word.to_vec(),
                    cra_trace,
                    pdrm_trace: Vec::new(),
                    error: Some(e.to_string()),
                })
            }
        }
    }
    let prefix: Vec<PropSet> = word[..cra_trace.len()]
        .iter()
        .map(|&s| remap(s, cra.props(), pdrm.props()))
        .collect();
    let pdrm_trace = match pdrm.run_word(&prefix) {
        Ok((trace, _)) => trace,
        Err(e) => {
            return Outcome::Differ(Mismatch {
                word_index: index,
                word: word.to_vec(),
                cra_trace,
                pdrm_trace: Vec::new(),
                error: Some(e.to_string()),
            })
        }
    };
    if pdrm_trace == cra_trace {
        Outcome::Equal { truncated }
    } else {
        Outcome::Differ(Mismatch {
            word_index: index,
            word: word.to_vec(),
            cra_trace,
            pdrm_trace,
            error: None,
        })
    }
}

/// Runs both machines on every word and compares the per-step reward traces
/// exactly. Words are labelled over the automaton's vocabulary and mapped by
/// name onto the pdRM's.
pub fn check_reward_equivalence(cra: &Cra, pdrm: &Pdrm, words: &[Vec<PropSet>]) -> EquivalenceReport {
    let outcomes: Vec<Outcome> = words
        .par_iter()
        .enumerate()
        .map(|(i, w)| compare_one(cra, pdrm, i, w))
        .collect();
    let mut report = EquivalenceReport {
        seed: None,
        n_words: words.len(),
        n_equal: 0,
        n_truncated: 0,
        mismatches: Vec::new(),
    };
    for o in outcomes {
        match o {
            Outcome::Equal { truncated } => {
                report.n_equal += 1;
                report.n_truncated += usize::from(truncated);
            }
            Outcome::Differ(m) => report.mismatches.push(m),
        }
    }
    report
}

/// A random deterministic one-counter automaton over props `a b c`.
///
/// Guards are drawn from the exact-label classes of the empty and singleton
/// labels so determinism holds by construction. Transitions guarded by a zero
/// test never decrement.
pub fn random_one_counter_cra(n_states: usize, max_abs_delta: i64, seed: u64) -> Cra {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let props = ["a", "b", "c"];
    let classes = [
        "!a & !b & !c",
        "a & !b & !c",
        "b & !a & !c",
        "c & !a & !b",
        "a & b",
    ];
    let states: Vec<String> = (0..n_states.max(1)).map(|i| format!("q{i}")).collect();
    let finals = vec!["done".to_string()];
    let mut transitions = Vec::new();
    for s in &states {
        for nonzero in [false, true] {
            for class in classes {
                if !rng.gen_bool(0.7) {
                    continue;
                }
                let delta = if nonzero {
                    rng.gen_range(-max_abs_delta..=max_abs_delta)
                } else {
                    rng.gen_range(0..=max_abs_delta)
                };
                let target = if rng.gen_bool(0.08) {
                    finals[0].clone()
                } else {
                    states[rng.gen_range(0..states.len())].clone()
                };
                transitions.push(RawCraTransition {
                    source: s.clone(),
                    guard: class.to_string(),
                    zero_test: vec![nonzero],
                    deltas: vec![delta],
                    reward: rng.gen_range(-4..=4) as f64 * 0.5,
                    target,
                    line: 0,
                });
            }
        }
    }
    CraSpec {
        name: format!("random-{seed}"),
        props: props.iter().map(|p| p.to_string()).collect(),
        states,
        initial: "q0".into(),
        finals,
        n_counters: 1,
        transitions,
    }
    .validate()
    .expect("generated automaton is deterministic by construction")
}
