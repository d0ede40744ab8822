//! Tabular gridworlds parsed from a text map.
//!
//! Map alphabet: `.` free, `#` wall, `S` start, `G` goal, `X` absorbing
//! goal, `A` absorbing. The border is an implicit wall. Actions are
//! N, E, S, W with ids 0..4.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{
    check_action, ActionId, EnvDescriptor, Environment, PolicyRole, SimRng, State, StateId,
    StateSpace, Transition,
};

pub const NORTH: ActionId = 0;
pub const EAST: ActionId = 1;
pub const SOUTH: ActionId = 2;
pub const WEST: ActionId = 3;
pub const GRID_ACTIONS: usize = 4;

pub const DEFAULT_GRID_MAX_STEPS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Wall,
    Start,
    Goal,
    AbsorbingGoal,
    Absorbing,
}

impl Cell {
    fn from_char(c: char) -> Option<Cell> {
        Some(match c {
            '.' => Cell::Free,
            '#' => Cell::Wall,
            'S' => Cell::Start,
            'G' => Cell::Goal,
            'X' => Cell::AbsorbingGoal,
            'A' => Cell::Absorbing,
            _ => return None,
        })
    }

    pub fn to_char(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Wall => '#',
            Cell::Start => 'S',
            Cell::Goal => 'G',
            Cell::AbsorbingGoal => 'X',
            Cell::Absorbing => 'A',
        }
    }

    pub fn is_absorbing(self) -> bool {
        matches!(self, Cell::Absorbing | Cell::AbsorbingGoal)
    }

    pub fn is_goal(self) -> bool {
        matches!(self, Cell::Goal | Cell::AbsorbingGoal)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: StateId,
    slip: f64,
}

impl GridMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn slip(&self) -> f64 {
        self.slip
    }

    pub fn with_slip(mut self, slip: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&slip) {
            return Err(Error::config("env.slip", format!("{slip} is not in [0, 1)")));
        }
        self.slip = slip;
        Ok(self)
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn state_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, id: StateId) -> Cell {
        self.cells[id]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn id(&self, row: usize, col: usize) -> StateId {
        row * self.width + col
    }

    pub fn row_col(&self, id: StateId) -> (usize, usize) {
        (id / self.width, id % self.width)
    }

    /// Ids of non-wall cells.
    pub fn valid_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.cells.len()).filter(|&i| self.cells[i] != Cell::Wall)
    }

    pub fn cells_of(&self, kind: Cell) -> Vec<StateId> {
        (0..self.cells.len())
            .filter(|&i| self.cells[i] == kind)
            .collect()
    }

    pub fn absorbing_cells(&self) -> Vec<StateId> {
        (0..self.cells.len())
            .filter(|&i| self.cells[i].is_absorbing())
            .collect()
    }

    /// 4-neighbourhood of a cell, excluding walls and the border.
    pub fn neighbors(&self, id: StateId) -> Vec<StateId> {
        (0..GRID_ACTIONS)
            .filter_map(|a| self.moved(id, a))
            .filter(|&n| n != id)
            .collect()
    }

    /// Cell reached by a deterministic move; walls and the border block.
    pub fn moved(&self, id: StateId, action: ActionId) -> Option<StateId> {
        let (r, c) = self.row_col(id);
        let (r, c) = match action {
            NORTH if r > 0 => (r - 1, c),
            EAST if c + 1 < self.width => (r, c + 1),
            SOUTH if r + 1 < self.height => (r + 1, c),
            WEST if c > 0 => (r, c - 1),
            NORTH | EAST | SOUTH | WEST => return Some(id),
            _ => return None,
        };
        let next = self.id(r, c);
        if self.cells[next] == Cell::Wall {
            Some(id)
        } else {
            Some(next)
        }
    }

    /// Possible successors of `(id, action)` with their probabilities.
    pub fn successors(&self, id: StateId, action: ActionId) -> Vec<(StateId, f64)> {
        if self.cells[id].is_absorbing() {
            return vec![(id, 1.0)];
        }
        let intended = self.moved(id, action).expect("valid action");
        if self.slip == 0.0 {
            return vec![(intended, 1.0)];
        }
        let [p, q] = perpendicular(action);
        let mut out: Vec<(StateId, f64)> = Vec::with_capacity(3);
        for (next, prob) in [
            (intended, 1.0 - self.slip),
            (self.moved(id, p).expect("valid"), self.slip / 2.0),
            (self.moved(id, q).expect("valid"), self.slip / 2.0),
        ] {
            match out.iter_mut().find(|(n, _)| *n == next) {
                Some(entry) => entry.1 += prob,
                None => out.push((next, prob)),
            }
        }
        out
    }

    /// Forward and reset rewards for moving from `from` into `to`.
    pub fn rewards(&self, from: StateId, to: StateId) -> (f64, f64) {
        if self.cells[from].is_absorbing() {
            return (0.0, 0.0);
        }
        let r_forward = if self.cells[to].is_goal() { 1.0 } else { 0.0 };
        let r_reset = if to == self.start { 1.0 } else { 0.0 };
        (r_forward, r_reset)
    }

    /// Whether entering `to` completes the task of `role`.
    pub fn ends(&self, from: StateId, to: StateId, role: PolicyRole) -> bool {
        if self.cells[from].is_absorbing() {
            return false;
        }
        match role {
            PolicyRole::Forward => self.cells[to] == Cell::Goal,
            PolicyRole::Reset => to == self.start,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(self.cells[self.id(r, c)].to_char());
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn perpendicular(action: ActionId) -> [ActionId; 2] {
    match action {
        NORTH | SOUTH => [EAST, WEST],
        _ => [NORTH, SOUTH],
    }
}

/// Parses a rectangular map. Trailing blank lines and `\r` are ignored.
pub fn parse_grid(text: &str) -> Result<GridMap> {
    let lines: Vec<&str> = text
        .trim_end_matches(['\n', '\r', ' ', '\t'])
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .collect();
    if lines.is_empty() || lines[0].is_empty() {
        return Err(Error::MapParse {
            line: 1,
            column: 1,
            message: "empty map".into(),
        });
    }
    let width = lines[0].chars().count();
    let mut cells = Vec::with_capacity(width * lines.len());
    let mut start = None;
    for (li, line) in lines.iter().enumerate() {
        let len = line.chars().count();
        if len != width {
            return Err(Error::MapParse {
                line: li + 1,
                column: len.min(width) + 1,
                message: format!("row has {len} cells, expected {width}"),
            });
        }
        for (ci, ch) in line.chars().enumerate() {
            let cell = Cell::from_char(ch).ok_or_else(|| Error::MapParse {
                line: li + 1,
                column: ci + 1,
                message: format!("unknown cell character {ch:?}"),
            })?;
            if cell == Cell::Start {
                if start.is_some() {
                    return Err(Error::MapParse {
                        line: li + 1,
                        column: ci + 1,
                        message: "second start cell 'S'".into(),
                    });
                }
                start = Some(cells.len());
            }
            cells.push(cell);
        }
    }
    let start = start.ok_or_else(|| Error::MapParse {
        line: 1,
        column: 1,
        message: "map has no start cell 'S'".into(),
    })?;
    Ok(GridMap {
        width,
        height: lines.len(),
        cells,
        start,
        slip: 0.0,
    })
}

pub const CORRIDOR3: &str = "S.G\n";

pub const DIDACTIC: &str = "\
........
.S.A....
.A......
....A...
..A...A.
........
.....AG.
........
";

pub const TWO_GOAL: &str = "\
.......
.......
G..S..X
.......
.......
";

/// Built-in maps by name.
pub fn builtin_grids() -> Vec<(&'static str, GridMap)> {
    [("didactic", DIDACTIC), ("two-goal", TWO_GOAL), ("corridor3", CORRIDOR3)]
        .into_iter()
        .map(|(name, text)| (name, parse_grid(text).expect("built-in map parses")))
        .collect()
}

pub fn builtin_grid(name: &str) -> Option<GridMap> {
    builtin_grids()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, g)| g)
}

/// A [`GridMap`] wrapped as an [`Environment`].
#[derive(Clone, Debug)]
pub struct GridWorld {
    map: GridMap,
    descriptor: EnvDescriptor,
}

impl GridWorld {
    pub fn new(name: impl Into<String>, map: GridMap, max_steps_per_episode: usize) -> Self {
        let descriptor = EnvDescriptor {
            name: name.into(),
            space: StateSpace::Tabular {
                count: map.state_count(),
            },
            action_count: GRID_ACTIONS,
            max_steps_per_episode,
        };
        GridWorld { map, descriptor }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        builtin_grid(name).map(|m| GridWorld::new(name, m, DEFAULT_GRID_MAX_STEPS))
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    fn cell_id(&self, state: &State) -> Result<StateId> {
        match state {
            State::Discrete(id) if *id < self.map.state_count() => {
                if self.map.cell(*id) == Cell::Wall {
                    Err(Error::InvalidState(format!("cell {id} is a wall")))
                } else {
                    Ok(*id)
                }
            }
            other => Err(Error::InvalidState(format!(
                "{other:?} is not a cell of a {}x{} grid",
                self.map.width, self.map.height
            ))),
        }
    }
}

/// One grid step, the free-function form used by tests and the oracle.
pub fn grid_step(
    map: &GridMap,
    state: StateId,
    action: ActionId,
    rng: &mut SimRng,
) -> Transition {
    let next = if map.cell(state).is_absorbing() {
        state
    } else {
        let dir = if map.slip > 0.0 && rng.random_bool(map.slip) {
            perpendicular(action)[rng.random_range(0..2)]
        } else {
            action
        };
        map.moved(state, dir).expect("valid action")
    };
    let (r_forward, r_reset) = map.rewards(state, next);
    Transition {
        state: State::Discrete(state),
        action,
        next_state: State::Discrete(next),
        r_forward,
        r_reset,
        absorbing: map.cell(next).is_absorbing(),
        ends_forward: map.ends(state, next, PolicyRole::Forward),
        ends_reset: map.ends(state, next, PolicyRole::Reset),
        source: PolicyRole::Forward,
        step_index: 0,
    }
}

impl Environment for GridWorld {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn step(&self, state: &State, action: ActionId, rng: &mut SimRng) -> Result<Transition> {
        check_action(action, GRID_ACTIONS)?;
        let id = self.cell_id(state)?;
        Ok(grid_step(&self.map, id, action, rng))
    }

    fn sample_initial(&self, _rng: &mut SimRng) -> State {
        State::Discrete(self.map.start)
    }

    fn is_absorbing(&self, state: &State) -> bool {
        state
            .id()
            .is_some_and(|id| id < self.map.state_count() && self.map.cell(id).is_absorbing())
    }

    fn in_reset_set(&self, state: &State) -> bool {
        state.id() == Some(self.map.start)
    }

    fn solve_threshold(&self) -> Option<f64> {
        Some(0.95)
    }

    fn grid_map(&self) -> Option<&GridMap> {
        Some(&self.map)
    }
}
