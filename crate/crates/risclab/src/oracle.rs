//! Exact ground truth for deterministic grids.
//!
//! BFS shortest paths and value iteration provide the reference values the
//! test suites and diagnostics compare against: optimal state values for
//! OVPD, step counts for the competency fixed point, and cross-checks of
//! learned tables. Everything here is a pure function of immutable inputs.

use crate::env::{Cell, Goal, GridSpec, ACTIONS};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),
    #[error("discount must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("distance must be at least 1, got {0}")]
    InvalidDistance(i64),
}

/// BFS distances from every free cell to one goal.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    goal: Goal,
    width: usize,
    dist: Vec<Option<u32>>,
}

impl DistanceTable {
    pub fn goal(&self) -> Goal {
        self.goal
    }

    /// Steps to the goal, or `None` if unreachable (or a wall).
    pub fn dist(&self, cell: Cell) -> Option<u32> {
        self.dist.get(cell.row * self.width + cell.col).copied().flatten()
    }
}

/// Converged optimal values for one goal under the terminate-on-entry
/// convention: the goal state itself has value 0 and every other state
/// satisfies `V*(s) = γ^(dist(s) − 1)`.
#[derive(Debug, Clone)]
pub struct ValueTable {
    goal: Goal,
    width: usize,
    pub gamma: f64,
    pub tolerance: f64,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn goal(&self) -> Goal {
        self.goal
    }

    pub fn value(&self, cell: Cell) -> f64 {
        self.values[cell.row * self.width + cell.col]
    }
}

/// BFS shortest paths to `goal` under the deterministic grid dynamics.
/// Grid moves are reversible, so distances-to-goal equal BFS layers
/// expanded from the goal cell. Unreachable cells stay `None`.
pub fn shortest_paths(spec: &GridSpec, goal: Goal) -> DistanceTable {
    let mut dist = vec![None; spec.num_cells()];
    let mut queue = VecDeque::new();
    dist[spec.cell_index(goal.cell)] = Some(0);
    queue.push_back(goal.cell);
    while let Some(cell) = queue.pop_front() {
        let d = dist[spec.cell_index(cell)].unwrap();
        for action in ACTIONS {
            let next = spec.next_cell(cell, action);
            let slot = &mut dist[spec.cell_index(next)];
            if slot.is_none() {
                *slot = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    DistanceTable {
        goal,
        width: spec.width(),
        dist,
    }
}

/// Value iteration to sup-norm convergence for the sparse unit-reward,
/// terminate-on-entry objective. Deterministic sweep order (row-major).
pub fn value_iteration(
    spec: &GridSpec,
    goal: Goal,
    gamma: f64,
    tolerance: f64,
) -> Result<ValueTable, OracleError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(OracleError::InvalidGamma(gamma));
    }
    if tolerance <= 0.0 {
        return Err(OracleError::NonPositiveTolerance(tolerance));
    }
    let free = spec.free_cells();
    let mut values = vec![0.0; spec.num_cells()];
    loop {
        let mut delta: f64 = 0.0;
        for &cell in &free {
            if cell == goal.cell {
                continue; // terminal: value pinned at 0
            }
            let mut best = f64::NEG_INFINITY;
            for action in ACTIONS {
                let next = spec.next_cell(cell, action);
                let r = if next == goal.cell { 1.0 } else { 0.0 };
                let cont = if next == goal.cell {
                    0.0
                } else {
                    values[spec.cell_index(next)]
                };
                best = best.max(r + gamma * cont);
            }
            let idx = spec.cell_index(cell);
            delta = delta.max((best - values[idx]).abs());
            values[idx] = best;
        }
        if delta < tolerance {
            break;
        }
    }
    Ok(ValueTable {
        goal,
        width: spec.width(),
        gamma,
        tolerance,
        values,
    })
}

/// The converged competency of an optimal policy at BFS distance `dist`:
/// `γ_sc^(dist − 1)`. This is the fixed point of the success-critic
/// recursion, whose one-step case yields 1 rather than `γ_sc`. Switching
/// fires before the critic is ever queried at the goal itself, so
/// `dist == 0` is out of domain.
pub fn optimal_competency(dist: i64, gamma_sc: f64) -> Result<f64, OracleError> {
    if dist < 1 {
        return Err(OracleError::InvalidDistance(dist));
    }
    Ok(gamma_sc.powi(dist as i32 - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Cell, GoalKind, GridSpec};

    fn open_5x5() -> GridSpec {
        GridSpec::new(
            5,
            5,
            vec![false; 25],
            Cell::new(0, 0),
            Cell::new(4, 4),
            Cell::new(0, 0),
        )
        .unwrap()
    }

    #[test]
    fn bfs_corner_to_corner_is_8() {
        let spec = open_5x5();
        let table = shortest_paths(&spec, spec.goal(GoalKind::Forward));
        assert_eq!(table.dist(Cell::new(0, 0)), Some(8));
        assert_eq!(table.dist(Cell::new(4, 4)), Some(0));
        assert_eq!(table.dist(Cell::new(4, 3)), Some(1));
        assert_eq!(table.dist(Cell::new(3, 4)), Some(1));
    }

    #[test]
    fn bfs_marks_unreachable_cells() {
        // The two right-hand cells sit behind a wall column.
        let spec = GridSpec::parse_map("S.#.\n.G#.").unwrap();
        let table = shortest_paths(&spec, spec.goal(GoalKind::Forward));
        assert_eq!(table.dist(Cell::new(0, 3)), None);
        assert_eq!(table.dist(Cell::new(1, 3)), None);
        assert_eq!(table.dist(Cell::new(1, 0)), Some(1));
        assert_eq!(table.dist(Cell::new(0, 0)), Some(2));
    }

    #[test]
    fn bfs_distance_decreases_along_some_action() {
        let spec = GridSpec::four_rooms();
        let goal = spec.goal(GoalKind::Forward);
        let table = shortest_paths(&spec, goal);
        for cell in spec.free_cells() {
            let d = table.dist(cell).expect("four-rooms is fully connected");
            if d == 0 {
                continue;
            }
            let best = ACTIONS
                .iter()
                .filter_map(|&a| table.dist(spec.next_cell(cell, a)))
                .min()
                .unwrap();
            assert_eq!(best, d - 1, "no improving action at {cell}");
        }
    }

    #[test]
    fn value_iteration_on_chain_matches_hand_values() {
        // Chain of 3 non-goal states plus the goal: distances [3,2,1].
        let spec = GridSpec::chain(4).unwrap();
        let table = value_iteration(&spec, spec.goal(GoalKind::Forward), 0.9, 1e-12).unwrap();
        let expect = [0.81, 0.9, 1.0];
        for (i, &v) in expect.iter().enumerate() {
            assert!((table.value(Cell::new(0, i)) - v).abs() < 1e-9);
        }
        assert_eq!(table.value(Cell::new(0, 3)), 0.0);
    }

    #[test]
    fn gamma_one_gives_unit_values() {
        let spec = open_5x5();
        let goal = spec.goal(GoalKind::Forward);
        let table = value_iteration(&spec, goal, 1.0, 1e-10).unwrap();
        for cell in spec.free_cells() {
            let expect = if cell == goal.cell { 0.0 } else { 1.0 };
            assert!((table.value(cell) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn value_iteration_rejects_bad_parameters() {
        let spec = open_5x5();
        let goal = spec.goal(GoalKind::Forward);
        assert_eq!(
            value_iteration(&spec, goal, 0.9, 0.0).unwrap_err(),
            OracleError::NonPositiveTolerance(0.0)
        );
        assert_eq!(
            value_iteration(&spec, goal, 0.0, 1e-10).unwrap_err(),
            OracleError::InvalidGamma(0.0)
        );
        assert_eq!(
            value_iteration(&spec, goal, 1.5, 1e-10).unwrap_err(),
            OracleError::InvalidGamma(1.5)
        );
    }

    /// Cross-oracle agreement: V*(s) = γ^(dist(s) − 1) on the four-rooms
    /// grid, and the Bellman optimality residual vanishes.
    #[test]
    fn value_iteration_agrees_with_bfs() {
        let spec = GridSpec::four_rooms();
        let gamma = 0.95;
        for kind in [GoalKind::Forward, GoalKind::Reset] {
            let goal = spec.goal(kind);
            let dist = shortest_paths(&spec, goal);
            let values = value_iteration(&spec, goal, gamma, 1e-12).unwrap();
            for cell in spec.free_cells() {
                let d = dist.dist(cell).unwrap();
                let expect = if d == 0 {
                    0.0
                } else {
                    gamma.powi(d as i32 - 1)
                };
                assert!(
                    (values.value(cell) - expect).abs() < 1e-9,
                    "mismatch at {cell} for {kind:?}"
                );
            }
        }
    }

    #[test]
    fn bellman_residual_within_tolerance() {
        let spec = GridSpec::four_rooms();
        let goal = spec.goal(GoalKind::Forward);
        let gamma = 0.95;
        let table = value_iteration(&spec, goal, gamma, 1e-10).unwrap();
        for cell in spec.free_cells() {
            if cell == goal.cell {
                continue;
            }
            let backup = ACTIONS
                .iter()
                .map(|&a| {
                    let next = spec.next_cell(cell, a);
                    if next == goal.cell {
                        1.0
                    } else {
                        gamma * table.value(next)
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((backup - table.value(cell)).abs() < 1e-8);
        }
    }

    #[test]
    fn values_monotone_in_distance() {
        let spec = GridSpec::four_rooms();
        let goal = spec.goal(GoalKind::Forward);
        let dist = shortest_paths(&spec, goal);
        let values = value_iteration(&spec, goal, 0.95, 1e-12).unwrap();
        let mut cells: Vec<_> = spec
            .free_cells()
            .into_iter()
            .filter(|&c| c != goal.cell)
            .collect();
        cells.sort_by_key(|&c| dist.dist(c).unwrap());
        for pair in cells.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if dist.dist(a).unwrap() < dist.dist(b).unwrap() {
                assert!(values.value(a) > values.value(b));
            }
        }
    }

    #[test]
    fn competency_fixed_point_values() {
        assert_eq!(optimal_competency(1, 0.95).unwrap(), 1.0);
        assert!((optimal_competency(3, 0.95).unwrap() - 0.9025).abs() < 1e-12);
        assert!((optimal_competency(5, 0.95).unwrap() - 0.81450625).abs() < 1e-12);
        assert_eq!(
            optimal_competency(0, 0.95).unwrap_err(),
            OracleError::InvalidDistance(0)
        );
        assert_eq!(
            optimal_competency(-2, 0.95).unwrap_err(),
            OracleError::InvalidDistance(-2)
        );
    }
}
