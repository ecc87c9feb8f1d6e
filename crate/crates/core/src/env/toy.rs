use rand_chacha::ChaCha8Rng;

use crate::props::PropSet;

use super::{props_vec, EnvState, LabeledMdp, Start};

/// States `0..n` in a row; action 0 moves left, action 1 right. Arriving at
/// the right end emits `goal`.
#[derive(Clone, Debug)]
pub struct ChainMdp {
    n: usize,
    props: Vec<String>,
    horizon: usize,
}

impl ChainMdp {
    pub fn new(n: usize, horizon: usize) -> Self {
        ChainMdp {
            n: n.max(1),
            props: props_vec(&["goal"]),
            horizon,
        }
    }

    fn successor(&self, s: EnvState, a: usize) -> EnvState {
        let s = s.0 as usize;
        let next = if a == 0 { s.saturating_sub(1) } else { (s + 1).min(self.n - 1) };
        EnvState(next as u32)
    }
}

impl LabeledMdp for ChainMdp {
    fn name(&self) -> &str {
        "chain"
    }

    fn props(&self) -> &[String] {
        &self.props
    }

    fn n_states(&self) -> usize {
        self.n
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn transitions(&self, s: EnvState, a: usize) -> Vec<(EnvState, f64)> {
        vec![(self.successor(s, a), 1.0)]
    }

    fn sample_next(&self, s: EnvState, a: usize, _rng: &mut ChaCha8Rng) -> EnvState {
        self.successor(s, a)
    }

    fn label(&self, s: EnvState, _a: usize, next: EnvState) -> PropSet {
        if s != next && next.0 as usize == self.n - 1 {
            PropSet::singleton(0)
        } else {
            PropSet::EMPTY
        }
    }

    fn initial_distribution(&self) -> Vec<Start> {
        vec![(EnvState(0), PropSet::EMPTY, 1.0)]
    }

    fn horizon(&self) -> usize {
        self.horizon
    }
}

/// One state; action `i` emits the `i`-th proposition. Useful for driving a
/// machine through arbitrary words.
#[derive(Clone, Debug)]
pub struct SymbolEmitter {
    props: Vec<String>,
    horizon: usize,
}

impl SymbolEmitter {
    pub fn new(props: &[&str], horizon: usize) -> Self {
        SymbolEmitter {
            props: props_vec(props),
            horizon,
        }
    }
}

impl LabeledMdp for SymbolEmitter {
    fn name(&self) -> &str {
        "emitter"
    }

    fn props(&self) -> &[String] {
        &self.props
    }

    fn n_states(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        self.props.len()
    }

    fn action_name(&self, a: usize) -> String {
        self.props[a].clone()
    }

    fn transitions(&self, s: EnvState, _a: usize) -> Vec<(EnvState, f64)> {
        vec![(s, 1.0)]
    }

    fn label(&self, _s: EnvState, a: usize, _next: EnvState) -> PropSet {
        PropSet::singleton(a)
    }

    fn initial_distribution(&self) -> Vec<Start> {
        vec![(EnvState(0), PropSet::EMPTY, 1.0)]
    }

    fn horizon(&self) -> usize {
        self.horizon
    }
}
