use rand_chacha::ChaCha8Rng;

use crate::props::PropSet;

use super::{props_vec, EnvError, EnvState, GridMap, LabeledMdp, Start, DIRS};

// proposition indices shared by both variants
const T: usize = 4;
const X: usize = 5;
const SAFE: usize = 6;
const ALL: usize = 7;

/// Deterministic gridworld for the treasure-retrieval tasks.
///
/// Each step is labelled with the direction of the action, even when the
/// move bumps into a wall. `t` and `x` are emitted only on arrival at a
/// treasure or the exit. In the multi-treasure variant the state also
/// records whether the safe cell has been visited and which treasures were
/// collected: treasures count only after the safe cell, each emits `t` once,
/// and the last one also emits `all`.
#[derive(Clone, Debug)]
pub struct TreasureMaze {
    name: String,
    map: GridMap,
    props: Vec<String>,
    start: usize,
    exit: usize,
    treasures: Vec<usize>,
    safe: Option<usize>,
    horizon: usize,
}

impl TreasureMaze {
    /// The map needs an `X` exit, `n_treasures` `T` cells and, when `multi`,
    /// an `H` safe cell. The start is `S` if present, else the exit.
    pub fn new(map: GridMap, n_treasures: usize, multi: bool, horizon: usize) -> Result<Self, EnvError> {
        let exit = map.single('X')?;
        let start = match map.marked('S') {
            [] => exit,
            [s] => *s,
            _ => return Err(EnvError::BadConfig("map has several `S` cells".into())),
        };
        let treasures = map.marked('T').to_vec();
        if treasures.len() != n_treasures || n_treasures == 0 {
            return Err(EnvError::BadConfig(format!(
                "expected {n_treasures} treasure cells, map has {}",
                treasures.len()
            )));
        }
        if !multi && n_treasures != 1 {
            return Err(EnvError::BadConfig("single-treasure maze with several treasures".into()));
        }
        if n_treasures > 8 {
            return Err(EnvError::BadConfig("at most 8 treasures are supported".into()));
        }
        let safe = if multi { Some(map.single('H')?) } else { None };
        let mut route = vec![start];
        route.extend(safe);
        route.extend(&treasures);
        route.push(exit);
        map.check_route(&route)?;
        let props = if multi {
            props_vec(&["u", "d", "l", "r", "t", "x", "safe", "all"])
        } else {
            props_vec(&["u", "d", "l", "r", "t", "x"])
        };
        Ok(TreasureMaze {
            name: if multi { "multimaze" } else { "maze" }.into(),
            map,
            props,
            start,
            exit,
            treasures,
            safe,
            horizon,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn is_multi(&self) -> bool {
        self.safe.is_some()
    }

    pub fn start_cell(&self) -> usize {
        self.start
    }

    pub fn exit_cell(&self) -> usize {
        self.exit
    }

    pub fn treasure_cells(&self) -> &[usize] {
        &self.treasures
    }

    /// Splits a state into (cell, safe visited, collected treasure mask).
    pub fn decode(&self, s: EnvState) -> (usize, bool, u32) {
        let n = self.map.n_cells();
        let s = s.0 as usize;
        let rest = s / n;
        (s % n, rest & 1 == 1, (rest >> 1) as u32)
    }

    pub fn encode(&self, cell: usize, safe: bool, mask: u32) -> EnvState {
        let rest = usize::from(safe) | ((mask as usize) << 1);
        EnvState((rest * self.map.n_cells() + cell) as u32)
    }

    fn successor(&self, s: EnvState, a: usize) -> EnvState {
        let (cell, safe, mask) = self.decode(s);
        let next = self.map.step(cell, DIRS[a]);
        if self.safe.is_none() || next == cell {
            return self.encode(next, safe, mask);
        }
        let safe = safe || Some(next) == self.safe;
        let mask = match self.treasures.iter().position(|&t| t == next) {
            Some(i) if safe => mask | (1 << i),
            _ => mask,
        };
        self.encode(next, safe, mask)
    }
}

impl LabeledMdp for TreasureMaze {
    fn name(&self) -> &str {
        &self.name
    }

    fn props(&self) -> &[String] {
        &self.props
    }

    fn n_states(&self) -> usize {
        let extra = if self.is_multi() { 2 << self.treasures.len() } else { 1 };
        self.map.n_cells() * extra
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn action_name(&self, a: usize) -> String {
        DIRS[a].prop().into()
    }

    fn describe_state(&self, s: EnvState) -> String {
        let (cell, safe, mask) = self.decode(s);
        let (r, c) = self.map.coords(cell);
        if self.is_multi() {
            format!("({r},{c}) safe={} found={mask:b}", u8::from(safe))
        } else {
            format!("({r},{c})")
        }
    }

    fn transitions(&self, s: EnvState, a: usize) -> Vec<(EnvState, f64)> {
        vec![(self.successor(s, a), 1.0)]
    }

    fn sample_next(&self, s: EnvState, a: usize, _rng: &mut ChaCha8Rng) -> EnvState {
        self.successor(s, a)
    }

    fn label(&self, s: EnvState, a: usize, next: EnvState) -> PropSet {
        let mut l = PropSet::singleton(a);
        let (from, _, mask) = self.decode(s);
        let (to, _, next_mask) = self.decode(next);
        if from == to {
            return l;
        }
        if to == self.exit {
            l = l.with(X);
        }
        match self.safe {
            None => {
                if self.treasures.contains(&to) {
                    l = l.with(T);
                }
            }
            Some(safe_cell) => {
                if to == safe_cell {
                    l = l.with(SAFE);
                }
                if next_mask != mask {
                    l = l.with(T);
                    if next_mask.count_ones() as usize == self.treasures.len() {
                        l = l.with(ALL);
                    }
                }
            }
        }
        l
    }

    fn initial_distribution(&self) -> Vec<Start> {
        vec![(self.encode(self.start, false, 0), PropSet::EMPTY, 1.0)]
    }

    fn horizon(&self) -> usize {
        self.horizon
    }
}
