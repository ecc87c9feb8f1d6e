use rand_chacha::ChaCha8Rng;

use crate::props::PropSet;

use super::{EnvError, EnvState, GridMap, LabeledMdp, Start, DIRS};

#[derive(Clone, Debug, PartialEq)]
pub struct DeliverConfig {
    pub map: GridMap,
    /// Delivery types are the map digits `1..=n_types`.
    pub n_types: usize,
    /// Total number of sequence-identifier propositions `seq_0 ..`.
    pub n_sequences: usize,
    /// Sequence ids drawn uniformly at the start of training episodes.
    pub train_sequences: Vec<usize>,
    /// Sequence ids drawn uniformly at the start of evaluation episodes.
    pub eval_sequences: Vec<usize>,
    pub horizon: usize,
}

/// Gridworld whose episodes start with a sequence-identifier event; arriving
/// at a location tagged with digit `i` emits `type_i`.
#[derive(Clone, Debug)]
pub struct DeliverWorld {
    cfg: DeliverConfig,
    props: Vec<String>,
    start: usize,
    type_of: Vec<Option<usize>>,
}

impl DeliverWorld {
    pub fn new(cfg: DeliverConfig) -> Result<Self, EnvError> {
        let map = &cfg.map;
        let start = map.single('S')?;
        if cfg.n_types == 0 || cfg.n_types > 9 {
            return Err(EnvError::BadConfig("delivery types must be 1..=9".into()));
        }
        if cfg.train_sequences.is_empty() || cfg.eval_sequences.is_empty() {
            return Err(EnvError::BadConfig("sequence sets must be non-empty".into()));
        }
        if let Some(j) = cfg
            .train_sequences
            .iter()
            .chain(&cfg.eval_sequences)
            .find(|&&j| j >= cfg.n_sequences)
        {
            return Err(EnvError::BadConfig(format!("sequence id {j} out of range")));
        }
        let mut type_of = vec![None; map.n_cells()];
        for t in 1..=cfg.n_types {
            let digit = char::from_digit(t as u32, 10).unwrap();
            let cells = map.marked(digit);
            if cells.is_empty() {
                return Err(EnvError::BadConfig(format!("map has no location of type {t}")));
            }
            for &c in cells {
                type_of[c] = Some(t - 1);
                map.check_route(&[start, c])?;
            }
        }
        let props = (0..cfg.n_sequences)
            .map(|j| format!("seq_{j}"))
            .chain((1..=cfg.n_types).map(|t| format!("type_{t}")))
            .collect();
        Ok(DeliverWorld {
            props,
            start,
            type_of,
            cfg,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.cfg.map
    }

    fn starts(&self, ids: &[usize]) -> Vec<Start> {
        let p = 1.0 / ids.len() as f64;
        ids.iter()
            .map(|&j| (EnvState(self.start as u32), PropSet::singleton(j), p))
            .collect()
    }
}

impl LabeledMdp for DeliverWorld {
    fn name(&self) -> &str {
        "deliverworld"
    }

    fn props(&self) -> &[String] {
        &self.props
    }

    fn n_states(&self) -> usize {
        self.cfg.map.n_cells()
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn action_name(&self, a: usize) -> String {
        DIRS[a].prop().into()
    }

    fn describe_state(&self, s: EnvState) -> String {
        format!("{:?}", self.cfg.map.coords(s.0 as usize))
    }

    fn transitions(&self, s: EnvState, a: usize) -> Vec<(EnvState, f64)> {
        vec![(EnvState(self.cfg.map.step(s.0 as usize, DIRS[a]) as u32), 1.0)]
    }

    fn sample_next(&self, s: EnvState, a: usize, _rng: &mut ChaCha8Rng) -> EnvState {
        EnvState(self.cfg.map.step(s.0 as usize, DIRS[a]) as u32)
    }

    fn label(&self, s: EnvState, _a: usize, next: EnvState) -> PropSet {
        if s == next {
            return PropSet::EMPTY;
        }
        match self.type_of[next.0 as usize] {
            Some(t) => PropSet::singleton(self.cfg.n_sequences + t),
            None => PropSet::EMPTY,
        }
    }

    fn initial_distribution(&self) -> Vec<Start> {
        self.starts(&self.cfg.train_sequences)
    }

    fn eval_distribution(&self) -> Vec<Start> {
        self.starts(&self.cfg.eval_sequences)
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }
}
