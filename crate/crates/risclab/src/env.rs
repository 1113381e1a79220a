//! Goal-conditioned deterministic gridworld environments.
//!
//! A [`GridWorld`] is operated in the reset-free regime: the environment
//! only returns to the initial state on rare hard resets (every
//! `hard_reset_frequency` steps), never between trajectories. Cells outside
//! the grid count as walls, so every grid is enclosed without storing an
//! explicit boundary ring.
//!
//! The built-in four-rooms layout is an 11×11 grid split by a wall along
//! row 5 and column 5 with one doorway per wall segment; the agent starts
//! near one corner at (1,1) and the forward goal sits near the opposite
//! corner at (9,9). A 1×n chain layout is provided as a diagnostic for
//! analytic fixed-point tests; it implements the same interface.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use thiserror::Error;

/// Enumeration guard: grids larger than this cannot be tabulated.
pub const MAX_ENUMERABLE_CELLS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid action index {0} (expected 0..4)")]
    InvalidAction(usize),
    #[error("grid has {cells} cells, enumeration supports at most {max}")]
    CapacityExceeded { cells: usize, max: usize },
    #[error("map parse error at line {line}: {reason}")]
    MapParse { line: usize, reason: String },
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
}

/// Grid coordinate; `row` counts down from the top, `col` across.
///
/// In CSV output these appear as `cell_y` and `cell_x` respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// The four grid moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

/// All actions in index order.
pub const ACTIONS: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

/// Number of actions; fixed for all grid layouts.
pub const NUM_ACTIONS: usize = 4;

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

impl TryFrom<usize> for Action {
    type Error = EnvError;

    fn try_from(v: usize) -> Result<Self, EnvError> {
        match v {
            0 => Ok(Action::Up),
            1 => Ok(Action::Down),
            2 => Ok(Action::Left),
            3 => Ok(Action::Right),
            _ => Err(EnvError::InvalidAction(v)),
        }
    }
}

/// Which of the two goal distributions a trajectory is pursuing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    /// The task goal.
    Forward,
    /// The initial-state goal used by the reset controller.
    Reset,
}

impl GoalKind {
    pub fn other(self) -> Self {
        match self {
            GoalKind::Forward => GoalKind::Reset,
            GoalKind::Reset => GoalKind::Forward,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GoalKind::Forward => "forward",
            GoalKind::Reset => "reset",
        }
    }

    pub fn index(self) -> usize {
        match self {
            GoalKind::Forward => 0,
            GoalKind::Reset => 1,
        }
    }
}

/// A goal: its kind plus the concrete cell it resolves to on this grid.
///
/// Construct through [`GridSpec::goal`] so the cell always matches the
/// spec's cell for that kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Goal {
    pub kind: GoalKind,
    pub cell: Cell,
}

/// Static grid layout: dimensions, walls, and the two goal cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    start_cell: Cell,
    forward_goal_cell: Cell,
    reset_goal_cell: Cell,
}

impl GridSpec {
    /// Builds and validates a spec. `walls` is row-major, `true` = wall.
    pub fn new(
        width: usize,
        height: usize,
        walls: Vec<bool>,
        start_cell: Cell,
        forward_goal_cell: Cell,
        reset_goal_cell: Cell,
    ) -> Result<Self, EnvError> {
        if width == 0 || height == 0 {
            return Err(EnvError::InvalidSpec("grid dimensions must be positive".into()));
        }
        if walls.len() != width * height {
            return Err(EnvError::InvalidSpec(format!(
                "wall mask has {} entries, expected {}",
                walls.len(),
                width * height
            )));
        }
        let spec = Self {
            width,
            height,
            walls,
            start_cell,
            forward_goal_cell,
            reset_goal_cell,
        };
        for (name, cell) in [
            ("start", start_cell),
            ("forward goal", forward_goal_cell),
            ("reset goal", reset_goal_cell),
        ] {
            if !spec.in_bounds(cell) {
                return Err(EnvError::InvalidSpec(format!("{name} cell {cell} out of bounds")));
            }
            if spec.is_wall(cell) {
                return Err(EnvError::InvalidSpec(format!("{name} cell {cell} is a wall")));
            }
        }
        // Reachability both ways: the deployment regime relies on the agent
        // being able to return, not just arrive.
        if !spec.reachable(start_cell, forward_goal_cell) {
            return Err(EnvError::InvalidSpec(
                "forward goal not reachable from start".into(),
            ));
        }
        if !spec.reachable(forward_goal_cell, start_cell) {
            return Err(EnvError::InvalidSpec(
                "start not reachable from forward goal".into(),
            ));
        }
        Ok(spec)
    }

    /// The built-in 11×11 four-rooms layout.
    ///
    /// Internal walls along row 5 and column 5 with doorways at (5,2),
    /// (5,8), (2,5) and (8,5); start (1,1); forward goal (9,9); the reset
    /// goal coincides with the start. 104 free cells.
    pub fn four_rooms() -> Self {
        let (w, h) = (11, 11);
        let mut walls = vec![false; w * h];
        for c in 0..w {
            walls[5 * w + c] = true;
        }
        for r in 0..h {
            walls[r * w + 5] = true;
        }
        for (r, c) in [(5, 2), (5, 8), (2, 5), (8, 5)] {
            walls[r * w + c] = false;
        }
        Self::new(
            w,
            h,
            walls,
            Cell::new(1, 1),
            Cell::new(9, 9),
            Cell::new(1, 1),
        )
        .expect("built-in layout is valid")
    }

    /// A 1×n open chain: start at column 0, forward goal at column n−1,
    /// reset goal back at column 0. Used for analytic fixed-point tests.
    pub fn chain(len: usize) -> Result<Self, EnvError> {
        if len < 2 {
            return Err(EnvError::InvalidSpec("chain needs at least 2 cells".into()));
        }
        Self::new(
            len,
            1,
            vec![false; len],
            Cell::new(0, 0),
            Cell::new(0, len - 1),
            Cell::new(0, 0),
        )
    }

    /// Parses the plain-text map format: `#` wall, `.` free, `S` start,
    /// `G` forward goal; one row per line. The reset goal is the start
    /// cell. Rows must be equal length; exactly one `S` and one `G`.
    pub fn parse_map(text: &str) -> Result<Self, EnvError> {
        let mut rows: Vec<&str> = Vec::new();
        for line in text.lines() {
            let line = line.trim_end();
            if !line.is_empty() {
                rows.push(line);
            }
        }
        if rows.is_empty() {
            return Err(EnvError::MapParse {
                line: 0,
                reason: "empty map".into(),
            });
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut walls = vec![false; width * height];
        let mut start = None;
        let mut goal = None;
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(EnvError::MapParse {
                    line: r + 1,
                    reason: format!("row width {} differs from {}", row.chars().count(), width),
                });
            }
            for (c, ch) in row.chars().enumerate() {
                match ch {
                    '#' => walls[r * width + c] = true,
                    '.' => {}
                    'S' => {
                        if start.replace(Cell::new(r, c)).is_some() {
                            return Err(EnvError::MapParse {
                                line: r + 1,
                                reason: "duplicate start cell 'S'".into(),
                            });
                        }
                    }
                    'G' => {
                        if goal.replace(Cell::new(r, c)).is_some() {
                            return Err(EnvError::MapParse {
                                line: r + 1,
                                reason: "duplicate goal cell 'G'".into(),
                            });
                        }
                    }
                    other => {
                        return Err(EnvError::MapParse {
                            line: r + 1,
                            reason: format!("unexpected character {other:?}"),
                        });
                    }
                }
            }
        }
        let start = start.ok_or(EnvError::MapParse {
            line: 0,
            reason: "missing start cell 'S'".into(),
        })?;
        let goal = goal.ok_or(EnvError::MapParse {
            line: 0,
            reason: "missing goal cell 'G'".into(),
        })?;
        Self::new(width, height, walls, start, goal, start)
    }

    /// Renders the map format that [`GridSpec::parse_map`] accepts.
    pub fn dump_map(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                let cell = Cell::new(r, c);
                let ch = if self.is_wall(cell) {
                    '#'
                } else if cell == self.start_cell {
                    'S'
                } else if cell == self.forward_goal_cell {
                    'G'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start_cell(&self) -> Cell {
        self.start_cell
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    /// Out-of-bounds counts as wall; the grid is enclosed without an
    /// explicit boundary ring.
    pub fn is_wall(&self, cell: Cell) -> bool {
        !self.in_bounds(cell) || self.walls[cell.row * self.width + cell.col]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && !self.is_wall(cell)
    }

    /// Dense index of a cell, for table storage.
    pub fn cell_index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    /// The goal of the given kind on this grid.
    pub fn goal(&self, kind: GoalKind) -> Goal {
        let cell = match kind {
            GoalKind::Forward => self.forward_goal_cell,
            GoalKind::Reset => self.reset_goal_cell,
        };
        Goal { kind, cell }
    }

    /// The cell reached by taking `action` from `cell`; blocked moves stay.
    pub fn next_cell(&self, cell: Cell, action: Action) -> Cell {
        let (dr, dc) = action.delta();
        let row = cell.row as isize + dr;
        let col = cell.col as isize + dc;
        if row < 0 || col < 0 {
            return cell;
        }
        let target = Cell::new(row as usize, col as usize);
        if self.is_free(target) {
            target
        } else {
            cell
        }
    }

    /// All free cells in row-major order.
    pub fn free_cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                let cell = Cell::new(r, c);
                if self.is_free(cell) {
                    cells.push(cell);
                }
            }
        }
        cells
    }

    /// Every free cell crossed with both goals, in a stable order
    /// (row-major cells, forward goal before reset goal).
    pub fn enumerate_states(&self) -> Result<Vec<(Cell, Goal)>, EnvError> {
        if self.num_cells() > MAX_ENUMERABLE_CELLS {
            return Err(EnvError::CapacityExceeded {
                cells: self.num_cells(),
                max: MAX_ENUMERABLE_CELLS,
            });
        }
        let mut out = Vec::new();
        for cell in self.free_cells() {
            for kind in [GoalKind::Forward, GoalKind::Reset] {
                out.push((cell, self.goal(kind)));
            }
        }
        Ok(out)
    }

    fn reachable(&self, from: Cell, to: Cell) -> bool {
        let mut seen = vec![false; self.num_cells()];
        let mut queue = VecDeque::new();
        seen[self.cell_index(from)] = true;
        queue.push_back(from);
        while let Some(cell) = queue.pop_front() {
            if cell == to {
                return true;
            }
            for action in ACTIONS {
                let next = self.next_cell(cell, action);
                if !seen[self.cell_index(next)] {
                    seen[self.cell_index(next)] = true;
                    queue.push_back(next);
                }
            }
        }
        false
    }
}

/// Success function: does the state match the goal?
pub fn success(agent_cell: Cell, goal: Goal) -> bool {
    agent_cell == goal.cell
}

/// Sparse reward: 1 exactly on entering the goal cell.
pub fn reward(next_cell: Cell, goal: Goal) -> f64 {
    if success(next_cell, goal) {
        1.0
    } else {
        0.0
    }
}

/// Dynamic environment state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvState {
    pub agent_cell: Cell,
    /// Steps taken since the last hard reset.
    pub global_step: u64,
}

/// Deployment-regime schedule for one environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeploymentConfig {
    /// Environment-provided reset cadence during training.
    pub hard_reset_frequency: u64,
    pub total_train_steps: u64,
    /// Evaluation episodes end at this many steps if the goal is not reached.
    pub eval_episode_limit: u64,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            hard_reset_frequency: 50_000,
            total_train_steps: 50_000,
            eval_episode_limit: 100,
        }
    }
}

impl DeploymentConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.hard_reset_frequency == 0 || self.total_train_steps == 0 || self.eval_episode_limit == 0
        {
            return Err(EnvError::InvalidSpec(
                "deployment parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    /// The cell the move physically led to, before any hard reset.
    pub moved_to: Cell,
    /// State after the step (post hard reset, if one fired).
    pub state: EnvState,
    /// True when this step triggered the scheduled hard reset.
    pub hard_reset: bool,
}

/// A gridworld running in the reset-free deployment regime.
///
/// Single-owner: mutate sequentially. Independent instances share nothing.
#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: GridSpec,
    state: EnvState,
    hard_reset_frequency: u64,
}

impl GridWorld {
    pub fn new(spec: GridSpec, hard_reset_frequency: u64) -> Self {
        let state = EnvState {
            agent_cell: spec.start_cell(),
            global_step: 0,
        };
        Self {
            spec,
            state,
            hard_reset_frequency,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn state(&self) -> EnvState {
        self.state
    }

    /// Returns the agent to the initial state distribution (a point mass
    /// at the start corner) and restarts the hard-reset clock.
    pub fn hard_reset(&mut self) -> EnvState {
        self.state = EnvState {
            agent_cell: self.spec.start_cell(),
            global_step: 0,
        };
        self.state
    }

    /// Takes one step. Blocked moves are no-ops; the scheduled hard reset
    /// fires as part of the step that reaches the frequency.
    pub fn step(&mut self, action: Action) -> StepOutcome {
        let moved_to = self.spec.next_cell(self.state.agent_cell, action);
        self.state.agent_cell = moved_to;
        self.state.global_step += 1;
        let hard_reset = self.state.global_step >= self.hard_reset_frequency;
        if hard_reset {
            self.hard_reset();
        }
        StepOutcome {
            moved_to,
            state: self.state,
            hard_reset,
        }
    }

    /// Step from a raw action index; rejects indices outside 0..4.
    pub fn step_index(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        Ok(self.step(Action::try_from(action)?))
    }
}

/// Binary-plane observation: agent, walls, and goal channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub width: usize,
    pub height: usize,
    pub agent: Vec<bool>,
    pub walls: Vec<bool>,
    pub goal: Vec<bool>,
}

impl Observation {
    /// The single set bit of the agent plane.
    pub fn agent_cell(&self) -> Option<Cell> {
        self.agent
            .iter()
            .position(|&b| b)
            .map(|i| Cell::new(i / self.width, i % self.width))
    }

    /// The single set bit of the goal plane.
    pub fn goal_cell(&self) -> Option<Cell> {
        self.goal
            .iter()
            .position(|&b| b)
            .map(|i| Cell::new(i / self.width, i % self.width))
    }

    /// Flattened planes in channel order (agent, walls, goal), 0/1 floats.
    pub fn to_flat(&self) -> Vec<f64> {
        self.agent
            .iter()
            .chain(self.walls.iter())
            .chain(self.goal.iter())
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Encodes the (state, goal) pair as three binary planes.
pub fn encode(spec: &GridSpec, state: EnvState, goal: Goal) -> Observation {
    let n = spec.num_cells();
    let mut agent = vec![false; n];
    let mut goal_plane = vec![false; n];
    agent[spec.cell_index(state.agent_cell)] = true;
    goal_plane[spec.cell_index(goal.cell)] = true;
    let mut walls = vec![false; n];
    for r in 0..spec.height() {
        for c in 0..spec.width() {
            let cell = Cell::new(r, c);
            walls[spec.cell_index(cell)] = spec.is_wall(cell);
        }
    }
    Observation {
        width: spec.width(),
        height: spec.height(),
        agent,
        walls,
        goal: goal_plane,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_rooms_has_104_free_cells() {
        let spec = GridSpec::four_rooms();
        assert_eq!(spec.free_cells().len(), 104);
        assert_eq!(spec.enumerate_states().unwrap().len(), 208);
    }

    #[test]
    fn four_rooms_doorways_and_goals() {
        let spec = GridSpec::four_rooms();
        for (r, c) in [(5, 2), (5, 8), (2, 5), (8, 5)] {
            assert!(spec.is_free(Cell::new(r, c)), "doorway ({r},{c}) should be free");
        }
        assert!(spec.is_wall(Cell::new(5, 5)));
        assert_eq!(spec.start_cell(), Cell::new(1, 1));
        assert_eq!(spec.goal(GoalKind::Forward).cell, Cell::new(9, 9));
        assert_eq!(spec.goal(GoalKind::Reset).cell, Cell::new(1, 1));
    }

    #[test]
    fn hard_reset_is_deterministic() {
        let mut env = GridWorld::new(GridSpec::four_rooms(), 50_000);
        let a = env.hard_reset();
        let b = env.hard_reset();
        assert_eq!(a, b);
        assert_eq!(a.agent_cell, Cell::new(1, 1));
        assert_eq!(a.global_step, 0);
    }

    #[test]
    fn step_moves_and_blocks() {
        let mut env = GridWorld::new(GridSpec::four_rooms(), 50_000);
        env.hard_reset();
        let out = env.step(Action::Right);
        assert_eq!(out.state.agent_cell, Cell::new(1, 2));
        // Up from row 0 is out of bounds: blocked.
        let mut env2 = GridWorld::new(GridSpec::four_rooms(), 50_000);
        env2.hard_reset();
        env2.step(Action::Up); // (0,1)
        let blocked = env2.step(Action::Up);
        assert_eq!(blocked.state.agent_cell, Cell::new(0, 1));
    }

    #[test]
    fn invalid_action_index_is_usage_error() {
        let mut env = GridWorld::new(GridSpec::four_rooms(), 50_000);
        assert_eq!(env.step_index(4).unwrap_err(), EnvError::InvalidAction(4));
    }

    #[test]
    fn hard_reset_fires_exactly_on_schedule() {
        let mut env = GridWorld::new(GridSpec::four_rooms(), 5);
        env.hard_reset();
        let mut resets = Vec::new();
        for i in 0..20 {
            let out = env.step(Action::Right);
            if out.hard_reset {
                resets.push(i);
                assert_eq!(out.state.agent_cell, Cell::new(1, 1));
                assert_eq!(out.state.global_step, 0);
            }
        }
        assert_eq!(resets, vec![4, 9, 14, 19]);
    }

    #[test]
    fn reward_is_sparse_on_entry() {
        let spec = GridSpec::four_rooms();
        let goal = spec.goal(GoalKind::Forward);
        assert_eq!(reward(Cell::new(9, 9), goal), 1.0);
        assert_eq!(reward(Cell::new(9, 8), goal), 0.0);
        assert!(success(Cell::new(9, 9), goal));
        assert!(!success(Cell::new(1, 1), goal));
    }

    #[test]
    fn forward_and_reset_goals_are_distinct_corners() {
        let spec = GridSpec::four_rooms();
        assert_ne!(
            spec.goal(GoalKind::Forward).cell,
            spec.goal(GoalKind::Reset).cell
        );
    }

    #[test]
    fn encode_round_trips_agent_and_goal() {
        let spec = GridSpec::four_rooms();
        let state = EnvState {
            agent_cell: Cell::new(3, 7),
            global_step: 12,
        };
        let obs = encode(&spec, state, spec.goal(GoalKind::Forward));
        assert_eq!(obs.agent_cell(), Some(Cell::new(3, 7)));
        assert_eq!(obs.goal_cell(), Some(Cell::new(9, 9)));
        assert_eq!(obs.agent.iter().filter(|&&b| b).count(), 1);
        assert_eq!(obs.goal.iter().filter(|&&b| b).count(), 1);
        assert_eq!(obs.walls.iter().filter(|&&b| b).count(), 17);
    }

    #[test]
    fn goal_planes_differ_only_in_goal_channel() {
        let spec = GridSpec::four_rooms();
        let state = EnvState {
            agent_cell: Cell::new(3, 7),
            global_step: 0,
        };
        let fwd = encode(&spec, state, spec.goal(GoalKind::Forward));
        let rst = encode(&spec, state, spec.goal(GoalKind::Reset));
        assert_eq!(fwd.agent, rst.agent);
        assert_eq!(fwd.walls, rst.walls);
        assert_ne!(fwd.goal, rst.goal);
    }

    #[test]
    fn enumerate_states_is_stable_and_guarded() {
        let spec = GridSpec::chain(4).unwrap();
        let a = spec.enumerate_states().unwrap();
        let b = spec.enumerate_states().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);

        let big = GridSpec::new(
            101,
            101,
            vec![false; 101 * 101],
            Cell::new(0, 0),
            Cell::new(100, 100),
            Cell::new(0, 0),
        )
        .unwrap();
        assert!(matches!(
            big.enumerate_states(),
            Err(EnvError::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn map_round_trip() {
        let spec = GridSpec::four_rooms();
        let text = spec.dump_map();
        let parsed = GridSpec::parse_map(&text).unwrap();
        assert_eq!(parsed, spec);
    }

    #[test]
    fn map_parse_rejects_bad_input() {
        assert!(matches!(
            GridSpec::parse_map("S.\n.").unwrap_err(),
            EnvError::MapParse { line: 2, .. }
        ));
        assert!(matches!(
            GridSpec::parse_map("S.\n.x").unwrap_err(),
            EnvError::MapParse { .. }
        ));
        assert!(matches!(
            GridSpec::parse_map("..\n..").unwrap_err(),
            EnvError::MapParse { .. }
        ));
        // Goal walled off from start.
        assert!(matches!(
            GridSpec::parse_map("S#G").unwrap_err(),
            EnvError::InvalidSpec(_)
        ));
    }

    #[test]
    fn chain_layout() {
        let spec = GridSpec::chain(5).unwrap();
        assert_eq!(spec.free_cells().len(), 5);
        assert_eq!(spec.goal(GoalKind::Forward).cell, Cell::new(0, 4));
        assert_eq!(spec.goal(GoalKind::Reset).cell, Cell::new(0, 0));
        let mut env = GridWorld::new(spec, 1_000);
        env.hard_reset();
        env.step(Action::Right);
        env.step(Action::Right);
        assert_eq!(env.state().agent_cell, Cell::new(0, 2));
        // Up/Down blocked on a 1-row chain.
        env.step(Action::Up);
        assert_eq!(env.state().agent_cell, Cell::new(0, 2));
    }

    proptest! {
        /// Replaying an action sequence from a hard reset reproduces the
        /// identical state sequence: step is pure between hard resets.
        #[test]
        fn replay_determinism(actions in proptest::collection::vec(0usize..4, 1..200)) {
            let spec = GridSpec::four_rooms();
            let mut a = GridWorld::new(spec.clone(), 50_000);
            let mut b = GridWorld::new(spec, 50_000);
            a.hard_reset();
            b.hard_reset();
            for &idx in &actions {
                let action = Action::try_from(idx).unwrap();
                prop_assert_eq!(a.step(action), b.step(action));
            }
        }

        /// Observations always carry exactly one agent bit and one goal bit.
        #[test]
        fn observation_bit_invariants(actions in proptest::collection::vec(0usize..4, 0..100)) {
            let spec = GridSpec::four_rooms();
            let mut env = GridWorld::new(spec.clone(), 50_000);
            env.hard_reset();
            for &idx in &actions {
                env.step(Action::try_from(idx).unwrap());
                let obs = encode(&spec, env.state(), spec.goal(GoalKind::Forward));
                prop_assert_eq!(obs.agent.iter().filter(|&&b| b).count(), 1);
                prop_assert_eq!(obs.goal.iter().filter(|&&b| b).count(), 1);
                prop_assert!(!spec.is_wall(env.state().agent_cell));
            }
        }
    }
}
