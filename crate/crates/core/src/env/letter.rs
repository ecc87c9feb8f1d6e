use crate::props::PropSet;

use super::{props_vec, EnvError, EnvState, GridMap, LabeledMdp, Start, DIRS};

const P_A: usize = 0;
const P_B: usize = 1;
const P_C: usize = 2;
const TAU: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct LetterEnvConfig {
    pub width: usize,
    pub height: usize,
    /// (row, col) cells.
    pub start: (usize, usize),
    pub a_cell: (usize, usize),
    pub c_cell: (usize, usize),
    pub exit: (usize, usize),
    pub horizon: usize,
}

impl Default for LetterEnvConfig {
    fn default() -> Self {
        LetterEnvConfig {
            width: 5,
            height: 5,
            start: (0, 0),
            a_cell: (0, 4),
            c_cell: (4, 0),
            exit: (4, 4),
            horizon: 60,
        }
    }
}

/// Open grid with an A cell that may turn into a B cell.
///
/// Landing on the A cell (including by bumping a wall while on it) emits
/// `P_A` and, with probability ½, marks the cell as B. The first landing
/// after that emits `P_B`; later landings emit nothing. The C cell emits
/// `P_C` and the exit emits `tau` on every landing.
#[derive(Clone, Debug)]
pub struct LetterEnv {
    map: GridMap,
    props: Vec<String>,
    start: usize,
    a_cell: usize,
    c_cell: usize,
    exit: usize,
    horizon: usize,
}

/// Phase of the A cell.
const FRESH: usize = 0;
const FLIPPED: usize = 1;
const SPENT: usize = 2;

impl LetterEnv {
    pub fn new(cfg: &LetterEnvConfig) -> Result<Self, EnvError> {
        let mut map = GridMap::open(cfg.width, cfg.height);
        for (mark, (r, c)) in [('S', cfg.start), ('A', cfg.a_cell), ('C', cfg.c_cell), ('X', cfg.exit)] {
            if r >= cfg.height || c >= cfg.width {
                return Err(EnvError::BadConfig(format!("cell ({r},{c}) is out of bounds")));
            }
            if mark != 'S' {
                map.set_mark(map.cell(r, c), mark);
            }
        }
        let cell = |(r, c): (usize, usize)| r * cfg.width + c;
        let (a, c, x) = (cell(cfg.a_cell), cell(cfg.c_cell), cell(cfg.exit));
        if a == c || a == x || c == x {
            return Err(EnvError::BadConfig("A, C and exit cells must differ".into()));
        }
        Self::build(map, cell(cfg.start), a, c, x, cfg.horizon)
    }

    /// Reads `A`, `C`, `X` and optional `S` (default: top-left) from a map.
    pub fn from_map(map: GridMap, horizon: usize) -> Result<Self, EnvError> {
        let a = map.single('A')?;
        let c = map.single('C')?;
        let x = map.single('X')?;
        let start = match map.marked('S') {
            [] => 0,
            [s] => *s,
            _ => return Err(EnvError::BadConfig("map has several `S` cells".into())),
        };
        Self::build(map, start, a, c, x, horizon)
    }

    fn build(map: GridMap, start: usize, a: usize, c: usize, x: usize, horizon: usize) -> Result<Self, EnvError> {
        if map.is_wall(start) {
            return Err(EnvError::BadConfig("start cell is a wall".into()));
        }
        map.check_route(&[start, a, c, x])?;
        Ok(LetterEnv {
            map,
            props: props_vec(&["P_A", "P_B", "P_C", "tau"]),
            start,
            a_cell: a,
            c_cell: c,
            exit: x,
            horizon,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    /// (cell, A-cell phase: 0 fresh, 1 flipped to B, 2 B consumed)
    pub fn decode(&self, s: EnvState) -> (usize, usize) {
        (s.0 as usize / 3, s.0 as usize % 3)
    }

    pub fn encode(&self, cell: usize, phase: usize) -> EnvState {
        EnvState((cell * 3 + phase) as u32)
    }

    pub fn cells(&self) -> (usize, usize, usize) {
        (self.a_cell, self.c_cell, self.exit)
    }
}

impl LabeledMdp for LetterEnv {
    fn name(&self) -> &str {
        "letterenv"
    }

    fn props(&self) -> &[String] {
        &self.props
    }

    fn n_states(&self) -> usize {
        self.map.n_cells() * 3
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn action_name(&self, a: usize) -> String {
        DIRS[a].prop().into()
    }

    fn describe_state(&self, s: EnvState) -> String {
        let (cell, phase) = self.decode(s);
        let (r, c) = self.map.coords(cell);
        format!("({r},{c}) a-phase={phase}")
    }

    fn transitions(&self, s: EnvState, a: usize) -> Vec<(EnvState, f64)> {
        let (cell, phase) = self.decode(s);
        let next = self.map.step(cell, DIRS[a]);
        if next != self.a_cell {
            return vec![(self.encode(next, phase), 1.0)];
        }
        match phase {
            FRESH => vec![(self.encode(next, FRESH), 0.5), (self.encode(next, FLIPPED), 0.5)],
            _ => vec![(self.encode(next, SPENT), 1.0)],
        }
    }

    fn label(&self, s: EnvState, _a: usize, next: EnvState) -> PropSet {
        let (_, phase) = self.decode(s);
        let (to, _) = self.decode(next);
        if to == self.a_cell {
            match phase {
                FRESH => PropSet::singleton(P_A),
                FLIPPED => PropSet::singleton(P_B),
                _ => PropSet::EMPTY,
            }
        } else if to == self.c_cell {
            PropSet::singleton(P_C)
        } else if to == self.exit {
            PropSet::singleton(TAU)
        } else {
            PropSet::EMPTY
        }
    }

    fn initial_distribution(&self) -> Vec<Start> {
        vec![(self.encode(self.start, FRESH), PropSet::EMPTY, 1.0)]
    }

    fn horizon(&self) -> usize {
        self.horizon
    }
}
