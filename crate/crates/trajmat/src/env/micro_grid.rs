//! Grid mazes parsed from ASCII layouts (`#` wall, `.` open, `S` start,
//! `G` goal, `K` key, `D` door). Observations are `[row, col, has_key]`;
//! the adapter normalizes coordinates by the grid extent so every grid
//! shares the unit square.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lift::{AdapterRegistry, ObsAdapter};

use super::Dynamics;

const STEP_REWARD: f64 = -0.01;
const GOAL_REWARD: f64 = 1.0;

/// Actions: 0 = up, 1 = down, 2 = left, 3 = right.
const DELTAS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Open,
    Wall,
    Key,
    Door,
    Goal,
}

#[derive(Debug, Clone)]
pub struct MicroGrid {
    tag: String,
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    start: (usize, usize),
}

impl MicroGrid {
    pub fn from_ascii(tag: &str, ascii: &str) -> Result<Self> {
        let lines: Vec<&str> = ascii.lines().map(|l| l.trim_end()).filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(Error::InvalidEnvParam("empty grid layout".into()));
        }
        let rows = lines.len();
        let cols = lines[0].chars().count();
        let mut cells = Vec::with_capacity(rows * cols);
        let mut start = None;
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(Error::InvalidEnvParam(format!("ragged grid row {r}")));
            }
            for (c, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Open,
                    'S' => {
                        if start.replace((r, c)).is_some() {
                            return Err(Error::InvalidEnvParam("multiple start cells".into()));
                        }
                        Cell::Open
                    }
                    'G' => Cell::Goal,
                    'K' => Cell::Key,
                    'D' => Cell::Door,
                    other => {
                        return Err(Error::InvalidEnvParam(format!("unknown grid char `{other}`")))
                    }
                };
                cells.push(cell);
            }
        }
        let start = start.ok_or_else(|| Error::InvalidEnvParam("no start cell".into()))?;
        Ok(Self { tag: tag.to_string(), rows, cols, cells, start })
    }

    /// Layout lookup order: builtin name, inline ASCII (`|` doubles as a
    /// row separator), then a file path.
    pub fn from_named_layout(tag: &str, layout: &str) -> Result<Self> {
        let inline = layout.chars().all(|c| "SGKD#.|\n".contains(c));
        let ascii = if let Some(builtin) = builtin_layout(layout) {
            builtin.to_string()
        } else if inline {
            layout.replace('|', "\n")
        } else {
            std::fs::read_to_string(layout)
                .map_err(|e| Error::InvalidEnvParam(format!("layout `{layout}`: {e}")))?
        };
        Self::from_ascii(tag, &ascii)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn cell(&self, r: usize, c: usize) -> Cell {
        self.cells[r * self.cols + c]
    }

    pub fn obs_of(&self, r: usize, c: usize, has_key: bool) -> Vec<f64> {
        vec![r as f64, c as f64, if has_key { 1.0 } else { 0.0 }]
    }

    fn decode(&self, obs: &[f64]) -> (usize, usize, bool) {
        (obs[0] as usize, obs[1] as usize, obs[2] != 0.0)
    }

    fn has_keys(&self) -> bool {
        self.cells.iter().any(|c| *c == Cell::Key)
    }

    /// Cells an agent may occupy (non-wall; doors only with a key).
    pub fn is_passable(&self, r: usize, c: usize, has_key: bool) -> bool {
        self.passable(r, c, has_key)
    }

    fn passable(&self, r: usize, c: usize, has_key: bool) -> bool {
        match self.cell(r, c) {
            Cell::Wall => false,
            Cell::Door => has_key,
            _ => true,
        }
    }
}

impl Dynamics for MicroGrid {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn action_count(&self) -> usize {
        4
    }

    fn fixed_start(&self) -> Vec<f64> {
        self.obs_of(self.start.0, self.start.1, false)
    }

    fn sample_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        // Uniform over open non-goal cells (without key).
        let open: Vec<(usize, usize)> = (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| matches!(self.cell(r, c), Cell::Open | Cell::Key))
            .collect();
        let (r, c) = open[rng.random_range(0..open.len())];
        let has_key = self.cell(r, c) == Cell::Key;
        self.obs_of(r, c, has_key)
    }

    fn transition(&self, obs: &[f64], action: usize) -> (Vec<f64>, f64, bool) {
        let (r, c, mut has_key) = self.decode(obs);
        let (dr, dc) = DELTAS[action];
        let nr = r as i64 + dr;
        let nc = c as i64 + dc;
        let (nr, nc) = if nr < 0
            || nc < 0
            || nr >= self.rows as i64
            || nc >= self.cols as i64
            || !self.passable(nr as usize, nc as usize, has_key)
        {
            (r, c)
        } else {
            (nr as usize, nc as usize)
        };
        if self.cell(nr, nc) == Cell::Key {
            has_key = true;
        }
        if self.cell(nr, nc) == Cell::Goal {
            (self.obs_of(nr, nc, has_key), GOAL_REWARD, true)
        } else {
            (self.obs_of(nr, nc, has_key), STEP_REWARD, false)
        }
    }

    fn register_adapter(&self, reg: &mut AdapterRegistry) {
        reg.register(&self.tag, ObsAdapter::GridCell { rows: self.rows, cols: self.cols }, 1.0);
    }

    fn enumerate_observations(&self) -> Option<Vec<Vec<f64>>> {
        let key_states: &[bool] = if self.has_keys() { &[false, true] } else { &[false] };
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                for &k in key_states {
                    if self.passable(r, c, k) {
                        out.push(self.obs_of(r, c, k));
                    }
                }
            }
        }
        Some(out)
    }
}

/// Built-in layouts used by the test suites and the default configs.
pub fn builtin_layout(name: &str) -> Option<&'static str> {
    Some(match name {
        "open_2x2" => "S.\n..",
        "open_3x3_wall" => "S..\n.#.\n...",
        "open_4x4" => "S...\n....\n....\n...G",
        "open_8x8" => concat!(
            "S.......\n",
            "........\n",
            "........\n",
            "........\n",
            "........\n",
            "........\n",
            "........\n",
            ".......G",
        ),
        "bottleneck_8x8" => concat!(
            "S...#...\n",
            "....#...\n",
            "....#...\n",
            "........\n",
            "....#...\n",
            "....#...\n",
            "....#...\n",
            "....#..G",
        ),
        "two_rooms_8x8" => concat!(
            "S...#...\n",
            "....#...\n",
            "....#...\n",
            "....#...\n",
            "....#...\n",
            "....#...\n",
            "....#...\n",
            "....#..G",
        ),
        "keydoor_8x8" => concat!(
            "S...#...\n",
            "....#...\n",
            ".K..#...\n",
            "....D...\n",
            "....#...\n",
            "....#...\n",
            "....#...\n",
            "....#..G",
        ),
        "macromaze_16x16" => concat!(
            "S.......#.......\n",
            "........#.......\n",
            "........#.......\n",
            "................\n",
            "........#.......\n",
            "........#.......\n",
            "........#.......\n",
            "........#.......\n",
            "###.########.###\n",
            "........#.......\n",
            "........#.......\n",
            "........#.......\n",
            "................\n",
            "........#.......\n",
            "........#.......\n",
            "........#......G",
        ),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_8x8() -> MicroGrid {
        MicroGrid::from_named_layout("micro_grid", "open_8x8").unwrap()
    }

    #[test]
    fn move_right_from_2_3() {
        let g = open_8x8();
        let (next, r, done) = g.transition(&g.obs_of(2, 3, false), 3);
        assert_eq!(next, g.obs_of(2, 4, false));
        assert_eq!(r, STEP_REWARD);
        assert!(!done);
    }

    #[test]
    fn blocked_move_stays_with_step_cost() {
        let g = MicroGrid::from_named_layout("micro_grid", "open_3x3_wall").unwrap();
        // (0,1) moving down hits the wall at (1,1).
        let (next, r, done) = g.transition(&g.obs_of(0, 1, false), 1);
        assert_eq!(next, g.obs_of(0, 1, false));
        assert_eq!(r, STEP_REWARD);
        assert!(!done);
        // Edge of the grid blocks too.
        let (next, _, _) = g.transition(&g.obs_of(0, 0, false), 0);
        assert_eq!(next, g.obs_of(0, 0, false));
    }

    #[test]
    fn goal_terminates_with_bonus() {
        let g = open_8x8();
        let (next, r, done) = g.transition(&g.obs_of(7, 6, false), 3);
        assert_eq!(next, g.obs_of(7, 7, false));
        assert_eq!(r, GOAL_REWARD);
        assert!(done);
    }

    #[test]
    fn key_unlocks_door() {
        let g = MicroGrid::from_named_layout("micro_grid", "keydoor_8x8").unwrap();
        // Door at (3,4) blocks without the key.
        let (next, _, _) = g.transition(&g.obs_of(3, 3, false), 3);
        assert_eq!(next, g.obs_of(3, 3, false));
        // Picking up the key at (2,1) sets the flag.
        let (next, _, _) = g.transition(&g.obs_of(2, 2, false), 2);
        assert_eq!(next, g.obs_of(2, 1, true));
        // With the key the door is passable.
        let (next, _, _) = g.transition(&g.obs_of(3, 3, true), 3);
        assert_eq!(next, g.obs_of(3, 4, true));
    }

    #[test]
    fn two_rooms_are_disconnected() {
        let g = MicroGrid::from_named_layout("micro_grid", "two_rooms_8x8").unwrap();
        // Flood fill from the start must never reach column > 4.
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![g.fixed_start()];
        while let Some(obs) = stack.pop() {
            if !seen.insert(crate::env::obs_key(&obs)) {
                continue;
            }
            for a in 0..4 {
                let (next, _, done) = g.transition(&obs, a);
                assert!(next[1] <= 4.0, "crossed the unbroken wall");
                if !done {
                    stack.push(next);
                }
            }
        }
    }

    #[test]
    fn macromaze_parses_and_connects() {
        let g = MicroGrid::from_named_layout("macro_maze", "macromaze_16x16").unwrap();
        assert_eq!(g.rows(), 16);
        assert_eq!(g.cols(), 16);
        // Goal is reachable from start: flood fill hits a terminal move.
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![g.fixed_start()];
        let mut reached_goal = false;
        while let Some(obs) = stack.pop() {
            if !seen.insert(crate::env::obs_key(&obs)) {
                continue;
            }
            for a in 0..4 {
                let (next, _, done) = g.transition(&obs, a);
                if done {
                    reached_goal = true;
                } else {
                    stack.push(next);
                }
            }
        }
        assert!(reached_goal);
    }

    #[test]
    fn layout_parser_rejects_garbage() {
        assert!(MicroGrid::from_ascii("g", "SX").is_err());
        assert!(MicroGrid::from_ascii("g", "S.\n...").is_err());
        assert!(MicroGrid::from_ascii("g", "..\n..").is_err());
    }
}
