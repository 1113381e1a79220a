//! Evaluation protocol and aggregate statistics.
//!
//! Evaluation runs greedy episodes from the initial state on an isolated
//! environment copy, so training state is never touched. Aggregates follow
//! the usual reporting style for small-sample RL: interquartile mean and
//! mean with stratified percentile-bootstrap confidence intervals
//! (resampling runs within each task), plus normalized area under the
//! learning curve as a sample-efficiency summary. OVPD measures how far a
//! learned value is from the optimal one at a state, as a proxy for how
//! informative visiting that state still is.

use crate::env::{success, Cell, GoalKind, GridSpec, GridWorld};
use crate::learner::QTable;
use crate::oracle::ValueTable;
use crate::seeding;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

/// Default heatmap window: visitation is tallied over this many
/// forward-mode steps after the window start.
pub const DEFAULT_HEATMAP_WINDOW: u64 = 2_000;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("OVPD is undefined at the goal state")]
    OvpdAtGoal,
    #[error("OVPD is undefined where the optimal value is zero")]
    OvpdZeroValue,
    #[error("confidence level must lie in (0,1), got {0}")]
    InvalidLevel(f64),
    #[error("bootstrap needs at least one replication")]
    NoReplications,
    #[error("log has only {available} qualifying steps after {start_step}, need {needed}")]
    InsufficientWindow {
        start_step: u64,
        available: u64,
        needed: u64,
    },
}

/// One evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalRecord {
    pub train_step: u64,
    pub episode_index: u32,
    pub episode_return: f64,
    pub success: bool,
    pub episode_length: u64,
}

/// Runs `episodes` greedy evaluation episodes from the initial state with
/// the forward goal. Episodes end on success or after `limit` steps. Uses
/// a fresh environment; consumes no RNG; never touches training state.
pub fn evaluate(
    spec: &GridSpec,
    q: &QTable,
    train_step: u64,
    episodes: u32,
    limit: u64,
) -> Vec<EvalRecord> {
    let goal = spec.goal(GoalKind::Forward);
    let mut records = Vec::with_capacity(episodes as usize);
    for episode_index in 0..episodes {
        let mut env = GridWorld::new(spec.clone(), u64::MAX);
        let mut state = env.hard_reset();
        let mut episode_return = 0.0;
        let mut reached = false;
        let mut length = 0;
        for _ in 0..limit {
            let action = q.greedy_action(state.agent_cell, goal.kind);
            let out = env.step(action);
            length += 1;
            if success(out.moved_to, goal) {
                episode_return += 1.0;
                reached = true;
                break;
            }
            state = out.state;
        }
        records.push(EvalRecord {
            train_step,
            episode_index,
            episode_return,
            success: reached,
            episode_length: length,
        });
    }
    records
}

/// Fraction of successful episodes in a slice of records.
pub fn success_rate(records: &[EvalRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.success).count() as f64 / records.len() as f64
}

/// Optimal value percent difference: `|max_a Q(s,a) − V*(s)| / V*(s)`.
pub fn ovpd(max_q: f64, v_star: f64) -> Result<f64, MetricsError> {
    if v_star == 0.0 {
        return Err(MetricsError::OvpdZeroValue);
    }
    Ok((max_q - v_star).abs() / v_star)
}

/// OVPD at a state, read from a learned table and an optimal-value table.
/// The goal cell is out of domain (its optimal value is pinned at zero).
pub fn ovpd_at(
    q: &QTable,
    values: &ValueTable,
    cell: Cell,
    goal_kind: GoalKind,
) -> Result<f64, MetricsError> {
    if cell == values.goal().cell {
        return Err(MetricsError::OvpdAtGoal);
    }
    ovpd(q.max_q(cell, goal_kind), values.value(cell))
}

/// Interquartile mean: the mean of the middle 50% of the samples
/// (`floor(n/4)` dropped from each end after sorting).
pub fn iqm(samples: &[f64]) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let k = sorted.len() / 4;
    let mid = &sorted[k..sorted.len() - k];
    Ok(mid.iter().sum::<f64>() / mid.len() as f64)
}

/// Arithmetic mean.
pub fn mean(samples: &[f64]) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Aggregation statistic for bootstrap reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StatMethod {
    #[serde(rename = "IQM")]
    Iqm,
    #[serde(rename = "Mean")]
    Mean,
}

impl StatMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            StatMethod::Iqm => "IQM",
            StatMethod::Mean => "Mean",
        }
    }

    fn apply(self, samples: &[f64]) -> Result<f64, MetricsError> {
        match self {
            StatMethod::Iqm => iqm(samples),
            StatMethod::Mean => mean(samples),
        }
    }
}

/// A point estimate with its bootstrap confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateStat {
    pub method: StatMethod,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Stratified percentile bootstrap over runs within each task.
///
/// `samples_per_task[t]` holds the per-run scores of task `t`. Each
/// replication resamples every task's runs with replacement (keeping the
/// per-task run counts), pools the resampled scores, and recomputes the
/// statistic; the interval is the percentile interval of the replicated
/// statistics. Replication `i` draws from the substream `("bootstrap", i)`
/// of `seed`, so results are deterministic given the seed.
pub fn bootstrap_ci(
    samples_per_task: &[Vec<f64>],
    method: StatMethod,
    reps: u32,
    level: f64,
    seed: u64,
) -> Result<AggregateStat, MetricsError> {
    if reps == 0 {
        return Err(MetricsError::NoReplications);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::InvalidLevel(level));
    }
    if samples_per_task.is_empty() || samples_per_task.iter().any(|t| t.is_empty()) {
        return Err(MetricsError::EmptyInput);
    }
    let pooled: Vec<f64> = samples_per_task.iter().flatten().copied().collect();
    let point = method.apply(&pooled)?;

    let mut stats = Vec::with_capacity(reps as usize);
    let mut resampled = Vec::with_capacity(pooled.len());
    for i in 0..reps {
        let mut rng = seeding::substream(seed, "bootstrap", u64::from(i));
        resampled.clear();
        for task in samples_per_task {
            for _ in 0..task.len() {
                resampled.push(task[rng.gen_range(0..task.len())]);
            }
        }
        stats.push(method.apply(&resampled)?);
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let alpha = 1.0 - level;
    let n = stats.len();
    let lo_idx = ((alpha / 2.0) * n as f64).floor() as usize;
    let hi_idx = (((1.0 - alpha / 2.0) * n as f64).ceil() as usize)
        .saturating_sub(1)
        .min(n - 1);
    Ok(AggregateStat {
        method,
        point,
        ci_low: stats[lo_idx.min(n - 1)],
        ci_high: stats[hi_idx],
    })
}

/// Normalized area under a learning curve: the mean of the per-evaluation
/// scores across the run.
pub fn auc(curve: &[f64]) -> Result<f64, MetricsError> {
    mean(curve)
}

/// Visitation counts and a value snapshot for one analysis window.
#[derive(Debug, Clone)]
pub struct HeatmapWindow {
    pub start_step: u64,
    pub window_len: u64,
    width: usize,
    /// Forward-mode visits per cell over the window; sums to `window_len`.
    visit_counts: Vec<u64>,
    /// Per-cell greedy value (max over actions) per goal at the window
    /// start.
    max_q: Vec<f64>,
}

impl HeatmapWindow {
    pub fn visits(&self, cell: Cell) -> u64 {
        self.visit_counts[cell.row * self.width + cell.col]
    }

    pub fn total_visits(&self) -> u64 {
        self.visit_counts.iter().sum()
    }

    pub fn max_q(&self, cell: Cell, goal_kind: GoalKind) -> f64 {
        let cells = self.visit_counts.len();
        self.max_q[goal_kind.index() * cells + cell.row * self.width + cell.col]
    }
}

/// Builds a heatmap window from per-step visit samples `(step, cell,
/// goal_kind)` and the Q snapshot taken at `start_step`. The window
/// collects the first `window_len` forward-mode visits at or after
/// `start_step`; hard resets consume no steps, so windows straddle them.
pub fn heatmap(
    visits: &[(u64, Cell, GoalKind)],
    q_at_start: &QTable,
    spec: &GridSpec,
    start_step: u64,
    window_len: u64,
) -> Result<HeatmapWindow, MetricsError> {
    let mut counts = vec![0u64; spec.num_cells()];
    let mut taken = 0u64;
    for &(step, cell, goal_kind) in visits {
        if step < start_step || goal_kind != GoalKind::Forward {
            continue;
        }
        counts[spec.cell_index(cell)] += 1;
        taken += 1;
        if taken == window_len {
            break;
        }
    }
    if taken < window_len {
        return Err(MetricsError::InsufficientWindow {
            start_step,
            available: taken,
            needed: window_len,
        });
    }
    let mut max_q = vec![0.0; 2 * spec.num_cells()];
    for kind in [GoalKind::Forward, GoalKind::Reset] {
        for cell in spec.free_cells() {
            max_q[kind.index() * spec.num_cells() + spec.cell_index(cell)] =
                q_at_start.max_q(cell, kind);
        }
    }
    Ok(HeatmapWindow {
        start_step,
        window_len,
        width: spec.width(),
        visit_counts: counts,
        max_q,
    })
}
