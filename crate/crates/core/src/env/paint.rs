use rand_chacha::ChaCha8Rng;

use crate::props::PropSet;

use super::{EnvState, LabeledMdp, Start};

pub const MAX_STAINS: usize = 5;

/// Single-state domain: the episode starts with `paint_n` for `n` stains
/// drawn uniformly from `1..=5`; action `i` requests `i + 1` units of soap,
/// emits `soap_{i+1}` and costs `(i+1)/(i+2)`.
#[derive(Clone, Debug)]
pub struct PaintWorld {
    props: Vec<String>,
    horizon: usize,
}

impl Default for PaintWorld {
    fn default() -> Self {
        PaintWorld::new()
    }
}

impl PaintWorld {
    pub fn new() -> Self {
        let props = (1..=MAX_STAINS)
            .map(|n| format!("paint_{n}"))
            .chain((1..=MAX_STAINS).map(|i| format!("soap_{i}")))
            .collect();
        PaintWorld { props, horizon: 5 }
    }

    /// Cost of requesting `units` of soap.
    pub fn penalty(units: usize) -> f64 {
        units as f64 / (units as f64 + 1.0)
    }
}

impl LabeledMdp for PaintWorld {
    fn name(&self) -> &str {
        "paintworld"
    }

    fn props(&self) -> &[String] {
        &self.props
    }

    fn n_states(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        MAX_STAINS
    }

    fn action_name(&self, a: usize) -> String {
        format!("soap{}", a + 1)
    }

    fn transitions(&self, s: EnvState, _a: usize) -> Vec<(EnvState, f64)> {
        vec![(s, 1.0)]
    }

    fn sample_next(&self, s: EnvState, _a: usize, _rng: &mut ChaCha8Rng) -> EnvState {
        s
    }

    fn label(&self, _s: EnvState, a: usize, _next: EnvState) -> PropSet {
        PropSet::singleton(MAX_STAINS + a)
    }

    fn reward(&self, _s: EnvState, a: usize, _next: EnvState) -> f64 {
        -Self::penalty(a + 1)
    }

    fn initial_distribution(&self) -> Vec<Start> {
        (0..MAX_STAINS)
            .map(|n| (EnvState(0), PropSet::singleton(n), 1.0 / MAX_STAINS as f64))
            .collect()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }
}
