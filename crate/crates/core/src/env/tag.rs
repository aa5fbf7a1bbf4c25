//! Tag: an agent chases an opponent that moves away from it.
//!
//! States are `agent_cell * n + opponent_cell` plus one terminal state.
//! Observations are `agent_cell * 2 + co_located` plus a terminal symbol, so
//! the agent's own cell is always observed and the opponent only when both
//! share a cell. Both actors move simultaneously from their pre-move cells;
//! a tag succeeds when they share a cell before the move.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{DiscretePomdp, PomdpBuilder, SparseRow};

pub type Cell = (i32, i32);

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const TAG: usize = 4;

pub const ACTION_LABELS: [&str; 5] = ["north", "south", "east", "west", "tag"];

const MOVES: [Cell; 4] = [(0, 1), (0, -1), (1, 0), (-1, 0)];

/// The classic 29-cell layout: a 10×2 base with a 3×3 tower on columns 5–7.
pub fn classic_cells() -> Vec<Cell> {
    let mut cells = Vec::with_capacity(29);
    for y in 0..2 {
        for x in 0..10 {
            cells.push((x, y));
        }
    }
    for y in 2..5 {
        for x in 5..8 {
            cells.push((x, y));
        }
    }
    cells
}

fn default_move_away() -> f64 {
    0.8
}

fn default_max_steps() -> usize {
    100
}

fn default_discount() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSpec {
    #[serde(default = "classic_cells")]
    pub cells: Vec<Cell>,
    #[serde(default = "default_move_away")]
    pub move_away_prob: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

impl Default for TagSpec {
    fn default() -> Self {
        Self {
            cells: classic_cells(),
            move_away_prob: default_move_away(),
            max_steps: default_max_steps(),
            discount: default_discount(),
        }
    }
}

/// Cell geometry shared by the model builder and the opponent rule.
#[derive(Debug, Clone)]
pub struct TagGrid {
    cells: Vec<Cell>,
    index: HashMap<Cell, usize>,
}

impl TagGrid {
    pub fn new(spec: &TagSpec) -> Result<Self> {
        if spec.cells.is_empty() {
            return Err(Error::InvalidArgument("tag layout has no cells".into()));
        }
        if !(0.0..=1.0).contains(&spec.move_away_prob) {
            return Err(Error::InvalidArgument(format!(
                "move_away_prob {} not in [0, 1]",
                spec.move_away_prob
            )));
        }
        if spec.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        let mut index = HashMap::new();
        for (i, c) in spec.cells.iter().enumerate() {
            if index.insert(*c, i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate cell {c:?}")));
            }
        }
        let grid = Self {
            cells: spec.cells.clone(),
            index,
        };
        // Connectivity under the 4-neighborhood.
        let mut seen = vec![false; grid.cells.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for m in MOVES {
                if let Some(j) = grid.neighbor(i, m) {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("tag layout is not connected".into()));
        }
        Ok(grid)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_index(&self, cell: Cell) -> Option<usize> {
        self.index.get(&cell).copied()
    }

    fn neighbor(&self, i: usize, (dx, dy): Cell) -> Option<usize> {
        let (x, y) = self.cells[i];
        self.cell_index((x + dx, y + dy))
    }

    /// Cell after a move; blocked moves leave the actor in place.
    pub fn moved(&self, i: usize, action: usize) -> usize {
        if action < 4 {
            self.neighbor(i, MOVES[action]).unwrap_or(i)
        } else {
            i
        }
    }

    pub fn state(&self, agent: usize, opponent: usize) -> usize {
        agent * self.len() + opponent
    }

    pub fn terminal_state(&self) -> usize {
        self.len() * self.len()
    }

    pub fn decode(&self, s: usize) -> Option<(usize, usize)> {
        (s < self.terminal_state()).then(|| (s / self.len(), s % self.len()))
    }

    pub fn num_observations(&self) -> usize {
        2 * self.len() + 1
    }

    pub fn observation(&self, agent: usize, co_located: bool) -> usize {
        agent * 2 + usize::from(co_located)
    }

    pub fn terminal_observation(&self) -> usize {
        2 * self.len()
    }
}

fn manhattan(a: Cell, b: Cell) -> i32 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

/// Opponent successor distribution over cell indices: the move-away mass is
/// shared equally by the in-layout moves that strictly increase Manhattan
/// distance to the agent; the rest stays put.
pub fn opponent_transition(
    grid: &TagGrid,
    move_away_prob: f64,
    agent: usize,
    opponent: usize,
) -> SparseRow {
    let agent_cell = grid.cells[agent];
    let here = manhattan(grid.cells[opponent], agent_cell);
    let away: Vec<usize> = MOVES
        .iter()
        .filter_map(|&m| grid.neighbor(opponent, m))
        .filter(|&j| manhattan(grid.cells[j], agent_cell) > here)
        .collect();
    if away.is_empty() {
        return vec![(opponent, 1.0)];
    }
    let share = move_away_prob / away.len() as f64;
    let mut row: SparseRow = away.into_iter().map(|j| (j, share)).collect();
    row.push((opponent, 1.0 - move_away_prob));
    row.retain(|(_, p)| *p > 0.0);
    row.sort_by_key(|(j, _)| *j);
    row
}

pub fn make_tag(spec: &TagSpec) -> Result<DiscretePomdp> {
    let grid = TagGrid::new(spec)?;
    let n = grid.len();
    let terminal = grid.terminal_state();
    let mut b = PomdpBuilder::new(terminal + 1, 5, grid.num_observations(), spec.discount);
    b.action_labels(ACTION_LABELS.iter().map(|s| s.to_string()).collect());
    for agent in 0..n {
        for opp in 0..n {
            let s = grid.state(agent, opp);
            let opp_row = opponent_transition(&grid, spec.move_away_prob, agent, opp);
            for a in 0..5 {
                if a == TAG && agent == opp {
                    b.transition(s, a, vec![(terminal, 1.0)]).reward(s, a, 10.0);
                    continue;
                }
                let next_agent = grid.moved(agent, a);
                let row = opp_row
                    .iter()
                    .map(|&(o, p)| (grid.state(next_agent, o), p))
                    .collect();
                b.transition(s, a, row)
                    .reward(s, a, if a == TAG { -10.0 } else { -1.0 });
            }
            let obs = grid.observation(agent, agent == opp);
            for a in 0..5 {
                b.observation(s, a, vec![(obs, 1.0)]);
            }
        }
    }
    b.terminal(terminal, grid.terminal_observation());
    b.build()
}
