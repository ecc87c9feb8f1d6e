use std::collections::{BTreeMap, VecDeque};

use super::EnvError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    Up,
    Down,
    Left,
    Right,
}

/// Action order shared by every grid domain.
pub const DIRS: [Dir; 4] = [Dir::Up, Dir::Down, Dir::Left, Dir::Right];

impl Dir {
    pub fn prop(self) -> &'static str {
        match self {
            Dir::Up => "u",
            Dir::Down => "d",
            Dir::Left => "l",
            Dir::Right => "r",
        }
    }

    fn delta(self) -> (i64, i64) {
        match self {
            Dir::Up => (-1, 0),
            Dir::Down => (1, 0),
            Dir::Left => (0, -1),
            Dir::Right => (0, 1),
        }
    }
}

/// An ASCII grid: `#` wall, `.` floor, and any other character marks a named
/// floor cell (`S` start, `T` treasure, `X` exit, `H` safe, `A`/`B`/`C`
/// letters, digits for delivery types).
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    walls: Vec<bool>,
    marks: BTreeMap<char, Vec<usize>>,
}

impl GridMap {
    pub fn parse(text: &str) -> Result<GridMap, EnvError> {
        let rows: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with(';'))
            .collect();
        let Some(&(_, first)) = rows.first() else {
            return Err(EnvError::Map {
                line: 0,
                message: "empty map".into(),
            });
        };
        let width = first.chars().count();
        let mut walls = Vec::new();
        let mut marks: BTreeMap<char, Vec<usize>> = BTreeMap::new();
        for (r, &(line, row)) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(EnvError::Map {
                    line,
                    message: format!("row has {} cells, expected {width}", row.chars().count()),
                });
            }
            for (c, ch) in row.chars().enumerate() {
                walls.push(ch == '#');
                if ch != '#' && ch != '.' {
                    if ch.is_whitespace() {
                        return Err(EnvError::Map {
                            line,
                            message: "whitespace inside the grid".into(),
                        });
                    }
                    marks.entry(ch).or_default().push(r * width + c);
                }
            }
        }
        Ok(GridMap {
            width,
            height: rows.len(),
            walls,
            marks,
        })
    }

    /// An open grid without walls or marks.
    pub fn open(width: usize, height: usize) -> GridMap {
        GridMap {
            width,
            height,
            walls: vec![false; width * height],
            marks: BTreeMap::new(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell / self.width, cell % self.width)
    }

    pub fn is_wall(&self, cell: usize) -> bool {
        self.walls[cell]
    }

    /// Cells marked with `mark`, in row-major order.
    pub fn marked(&self, mark: char) -> &[usize] {
        self.marks.get(&mark).map_or(&[], Vec::as_slice)
    }

    pub fn single(&self, mark: char) -> Result<usize, EnvError> {
        match self.marked(mark) {
            [c] => Ok(*c),
            [] => Err(EnvError::BadConfig(format!("map has no `{mark}` cell"))),
            _ => Err(EnvError::BadConfig(format!("map has several `{mark}` cells"))),
        }
    }

    pub fn mark_of(&self, cell: usize) -> Option<char> {
        self.marks
            .iter()
            .find(|(_, cells)| cells.contains(&cell))
            .map(|(&ch, _)| ch)
    }

    /// Places `mark` on a floor cell, replacing any previous mark there.
    pub fn set_mark(&mut self, cell: usize, mark: char) {
        for cells in self.marks.values_mut() {
            cells.retain(|&c| c != cell);
        }
        self.walls[cell] = false;
        let cells = self.marks.entry(mark).or_default();
        cells.push(cell);
        cells.sort_unstable();
    }

    /// Deterministic move; leaving the grid or entering a wall stays put.
    pub fn step(&self, cell: usize, dir: Dir) -> usize {
        let (r, c) = self.coords(cell);
        let (dr, dc) = dir.delta();
        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
        if nr < 0 || nc < 0 || nr >= self.height as i64 || nc >= self.width as i64 {
            return cell;
        }
        let next = self.cell(nr as usize, nc as usize);
        if self.walls[next] {
            cell
        } else {
            next
        }
    }

    /// Shortest move count between cells, `None` when unreachable.
    pub fn distances(&self, from: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_cells()];
        dist[from] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            let d = dist[c].unwrap();
            for dir in DIRS {
                let n = self.step(c, dir);
                if dist[n].is_none() {
                    dist[n] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Checks that every cell in `route` can be reached from its predecessor.
    pub fn check_route(&self, route: &[usize]) -> Result<(), EnvError> {
        for pair in route.windows(2) {
            if self.distances(pair[0])[pair[1]].is_none() {
                let (a, b) = (self.coords(pair[0]), self.coords(pair[1]));
                return Err(EnvError::BadConfig(format!(
                    "cell {b:?} is unreachable from {a:?}"
                )));
            }
        }
        Ok(())
    }

    /// Shortest list of moves from `from` to `to`.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<Dir>> {
        let dist = self.distances(to);
        dist[from]?;
        let mut path = Vec::new();
        let mut at = from;
        while at != to {
            let (dir, next) = DIRS
                .iter()
                .map(|&d| (d, self.step(at, d)))
                .find(|&(_, n)| dist[n].is_some_and(|x| Some(x + 1) == dist[at]))?;
            path.push(dir);
            at = next;
        }
        Some(path)
    }
}
