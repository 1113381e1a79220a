//! Controller orchestration for reset-free training.
//!
//! One agent alternates between a forward goal and a reset goal. The
//! intelligent-switching controller ends a trajectory when the goal is
//! reached, when it hits the maximum length, or — on the gated fraction
//! of trajectories — early, with probability `λ = c·(1 − β^t)` where `c`
//! is the success critic's competency at the current state. Checks are
//! evaluated strictly in that order, and a minimum trajectory length
//! suppresses early checks (never the goal check).
//!
//! Baselines share the loop: forward-backward switching uses only the
//! goal/maximum-length rules; the reverse-curriculum agent hands control
//! back to the forward goal when its backward competency drops below a
//! threshold; the naive agent never leaves the forward goal; the episodic
//! oracle gets the frequent environment resets that the deployment
//! regime denies everyone else.

use crate::env::{
    reward, success, Cell, DeploymentConfig, Goal, GoalKind, GridSpec, GridWorld,
};
use crate::learner::{Learner, QTable, Transition};
use crate::metrics::{self, EvalRecord};
use crate::seeding::RngStreams;
use crate::success_critic::SuccessCritic;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SwitchError {
    #[error("zeta must lie in [0,1], got {0}")]
    InvalidZeta(f64),
    #[error("beta must lie in [0,1], got {0}")]
    InvalidBeta(f64),
    #[error("trajectory lengths must satisfy 0 <= min < max, got min={min} max={max}")]
    InvalidLengths { min: u64, max: u64 },
}

/// Switching-policy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfig {
    /// Fraction of trajectories on which early switching is considered.
    pub zeta: f64,
    /// Steps before early checks may fire.
    pub min_length: u64,
    /// Trajectories truncate at this length.
    pub max_length: u64,
    /// Conservative factor ramping the switch probability with
    /// trajectory length.
    pub beta: f64,
}

impl SwitchConfig {
    pub fn new(zeta: f64, min_length: u64, max_length: u64, beta: f64) -> Result<Self, SwitchError> {
        let cfg = Self {
            zeta,
            min_length,
            max_length,
            beta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `min_length` given as a fraction of `max_length`, rounded down.
    pub fn from_fraction(
        zeta: f64,
        min_fraction: f64,
        max_length: u64,
        beta: f64,
    ) -> Result<Self, SwitchError> {
        if !(0.0..=1.0).contains(&min_fraction) {
            return Err(SwitchError::InvalidLengths {
                min: (min_fraction * max_length as f64) as u64,
                max: max_length,
            });
        }
        Self::new(zeta, (min_fraction * max_length as f64).floor() as u64, max_length, beta)
    }

    pub fn validate(&self) -> Result<(), SwitchError> {
        if !(0.0..=1.0).contains(&self.zeta) || self.zeta.is_nan() {
            return Err(SwitchError::InvalidZeta(self.zeta));
        }
        if !(0.0..=1.0).contains(&self.beta) || self.beta.is_nan() {
            return Err(SwitchError::InvalidBeta(self.beta));
        }
        if self.max_length == 0 || self.min_length >= self.max_length {
            return Err(SwitchError::InvalidLengths {
                min: self.min_length,
                max: self.max_length,
            });
        }
        Ok(())
    }

    /// Four-rooms defaults: ζ=0.5, m=0, M=100, β=0.95.
    pub fn four_rooms_defaults() -> Self {
        Self {
            zeta: 0.5,
            min_length: 0,
            max_length: 100,
            beta: 0.95,
        }
    }
}

/// Why a trajectory ended (or `None` when it continues).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchReason {
    GoalReached,
    Truncated,
    EarlySwitch,
    None,
}

impl SwitchReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SwitchReason::GoalReached => "goal_reached",
            SwitchReason::Truncated => "truncated",
            SwitchReason::EarlySwitch => "early_switch",
            SwitchReason::None => "none",
        }
    }
}

/// The controller's verdict for the current step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchDecision {
    pub switch: bool,
    pub reason: SwitchReason,
}

impl SwitchDecision {
    fn stay() -> Self {
        Self {
            switch: false,
            reason: SwitchReason::None,
        }
    }

    fn go(reason: SwitchReason) -> Self {
        Self {
            switch: true,
            reason,
        }
    }
}

/// Audit record of one competency check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchProbe {
    pub competency: f64,
    pub lambda: f64,
    /// The uniform draw compared against `lambda`; absent for threshold
    /// rules that draw nothing.
    pub draw: Option<f64>,
}

/// Per-trajectory controller state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryContext {
    pub goal: Goal,
    /// Steps taken in the current trajectory.
    pub t: u64,
    /// Whether early switching is armed for this trajectory.
    pub check_switch: bool,
}

/// Which controller drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Intelligent switching: goal/timeout rules plus competency-gated
    /// early switches.
    Risc,
    /// Forward-backward alternation on goal/timeout rules only.
    Fbrl,
    /// Backward controller that defers to the forward controller when its
    /// competency falls below a threshold.
    ReverseCurriculum,
    /// Forward goal only; an episodic agent dropped into the reset-free
    /// world.
    Naive,
    /// Frequent environment resets; the unrealistic upper baseline.
    EpisodicOracle,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Risc => "risc",
            ControllerKind::Fbrl => "fbrl",
            ControllerKind::ReverseCurriculum => "reverse_curriculum",
            ControllerKind::Naive => "naive",
            ControllerKind::EpisodicOracle => "episodic_oracle",
        }
    }
}

/// Draws whether the upcoming trajectory performs early-switch checks:
/// a Bernoulli(ζ) gate fixed for the whole trajectory.
pub fn begin_trajectory(cfg: &SwitchConfig, rng: &mut impl Rng) -> bool {
    rng.gen::<f64>() < cfg.zeta
}

/// Early-switch probability: `c·(1 − β^t)`. Nondecreasing in `t` and
/// approaching `c` as the trajectory grows (for β < 1).
pub fn switch_probability(competency: f64, beta: f64, t: u64) -> f64 {
    competency * (1.0 - beta.powf(t as f64))
}

/// The switching rule, checks in strict order: goal reached, maximum
/// length, minimum length, then the competency-gated random draw.
pub fn should_switch(
    t: u64,
    cell: Cell,
    goal: Goal,
    check_switch: bool,
    competency: impl FnOnce(Cell, Goal) -> f64,
    cfg: &SwitchConfig,
    rng: &mut impl Rng,
) -> (SwitchDecision, Option<SwitchProbe>) {
    if success(cell, goal) {
        return (SwitchDecision::go(SwitchReason::GoalReached), None);
    }
    if t >= cfg.max_length {
        return (SwitchDecision::go(SwitchReason::Truncated), None);
    }
    if t < cfg.min_length {
        return (SwitchDecision::stay(), None);
    }
    if check_switch {
        let c = competency(cell, goal);
        let lambda = switch_probability(c, cfg.beta, t);
        let draw = rng.gen::<f64>();
        let probe = SwitchProbe {
            competency: c,
            lambda,
            draw: Some(draw),
        };
        let decision = if draw < lambda {
            SwitchDecision::go(SwitchReason::EarlySwitch)
        } else {
            SwitchDecision::stay()
        };
        return (decision, Some(probe));
    }
    (SwitchDecision::stay(), None)
}

/// The reverse-curriculum rule: goal and maximum-length checks always
/// apply; while pursuing the reset goal, control passes forward as soon
/// as competency drops below `threshold`. Forward trajectories never
/// switch early.
pub fn rc_should_switch(
    t: u64,
    cell: Cell,
    goal: Goal,
    competency: impl FnOnce(Cell, Goal) -> f64,
    threshold: f64,
    cfg: &SwitchConfig,
) -> (SwitchDecision, Option<SwitchProbe>) {
    if success(cell, goal) {
        return (SwitchDecision::go(SwitchReason::GoalReached), None);
    }
    if t >= cfg.max_length {
        return (SwitchDecision::go(SwitchReason::Truncated), None);
    }
    if goal.kind == GoalKind::Reset {
        let c = competency(cell, goal);
        let probe = SwitchProbe {
            competency: c,
            lambda: threshold,
            draw: None,
        };
        let decision = if c < threshold {
            SwitchDecision::go(SwitchReason::EarlySwitch)
        } else {
            SwitchDecision::stay()
        };
        return (decision, Some(probe));
    }
    (SwitchDecision::stay(), None)
}

/// Toggles the pursued goal and restarts trajectory bookkeeping,
/// redrawing the early-switch gate.
pub fn switch_goals(
    ctx: &TrajectoryContext,
    spec: &GridSpec,
    cfg: &SwitchConfig,
    draw_gate: bool,
    rng: &mut impl Rng,
) -> TrajectoryContext {
    TrajectoryContext {
        goal: spec.goal(ctx.goal.kind.other()),
        t: 0,
        check_switch: draw_gate && begin_trajectory(cfg, rng),
    }
}

/// One logged training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// 0-based environment step.
    pub step: u64,
    /// Cell occupied after the move (before any hard reset).
    pub cell: Cell,
    /// Goal pursued during the step.
    pub goal_kind: GoalKind,
    pub epsilon: f64,
    pub replay_size: usize,
    /// Present when a trajectory boundary follows this step.
    pub boundary: Option<BoundaryRecord>,
}

/// A trajectory boundary: its length and why it ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRecord {
    pub traj_len: u64,
    pub reason: SwitchReason,
}

/// One switch-trace row: every boundary plus every competency probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub t: u64,
    pub reason: SwitchReason,
    pub probe: Option<SwitchProbe>,
    pub switched: bool,
}

/// Q-table snapshot captured mid-run for heatmap analysis.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Number of completed steps at capture time.
    pub step: u64,
    pub q: QTable,
    pub qf: QTable,
}

/// Everything a training run produces, in memory.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub steps: Vec<StepRecord>,
    pub evals: Vec<EvalRecord>,
    pub trace: Vec<TraceRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl TrainingLog {
    /// Visit samples in the shape the heatmap extractor wants.
    pub fn visits(&self) -> Vec<(u64, Cell, GoalKind)> {
        self.steps.iter().map(|s| (s.step, s.cell, s.goal_kind)).collect()
    }

    /// Lengths of all completed trajectories.
    pub fn trajectory_lengths(&self) -> Vec<u64> {
        self.steps
            .iter()
            .filter_map(|s| s.boundary.map(|b| b.traj_len))
            .collect()
    }
}

/// Training-loop parameters beyond the component configs.
#[derive(Debug, Clone)]
pub struct RunParams<'a> {
    pub controller: ControllerKind,
    pub switch_cfg: SwitchConfig,
    pub deployment: DeploymentConfig,
    /// Competency threshold for the reverse-curriculum baseline.
    pub rc_threshold: f64,
    /// Score competency with the exact ε-greedy mixture instead of the
    /// greedy action (ablation flag).
    pub eps_mixture_competency: bool,
    /// Evaluate every this many steps; 0 disables evaluation.
    pub eval_cadence: u64,
    pub eval_episodes: u32,
    /// Capture Q/Q_F snapshots after these step counts.
    pub snapshot_steps: &'a [u64],
}

/// Runs the deployment regime for `total_train_steps`: act, step, store
/// the transition with terminal/truncation flags settled by the
/// controller decision, train both critics on the same replayed batch,
/// then apply any switch. All stochasticity comes from the per-concern
/// streams in `rngs`.
pub fn run_training(
    spec: &GridSpec,
    learner: &mut Learner,
    critic: &mut SuccessCritic,
    params: &RunParams,
    rngs: &mut RngStreams,
) -> TrainingLog {
    let is_risc = params.controller == ControllerKind::Risc;
    let mut env = GridWorld::new(spec.clone(), params.deployment.hard_reset_frequency);
    let mut state = env.hard_reset();
    let mut log = TrainingLog::default();
    let mut ctx = TrajectoryContext {
        goal: spec.goal(GoalKind::Forward),
        t: 0,
        check_switch: is_risc && begin_trajectory(&params.switch_cfg, &mut rngs.switching),
    };
    if params.snapshot_steps.contains(&0) {
        log.snapshots.push(Snapshot {
            step: 0,
            q: learner.q().clone(),
            qf: critic.qf().clone(),
        });
    }

    for step in 0..params.deployment.total_train_steps {
        let epsilon = learner.config().epsilon(step);
        let action = learner.act(state.agent_cell, ctx.goal, step, &mut rngs.actions);
        let outcome = env.step(action);
        let moved_to = outcome.moved_to;
        let t_now = ctx.t + 1;

        // Controller verdict at the successor state, using the critics as
        // they stand before this step's update.
        let (decision, probe) = {
            let eps_for_mixture = epsilon;
            let q = learner.q();
            let competency = |cell: Cell, goal: Goal| -> f64 {
                let greedy = q.greedy_action(cell, goal.kind);
                if params.eps_mixture_competency {
                    critic.competency_eps_mixture(cell, goal, greedy, eps_for_mixture)
                } else {
                    critic.competency(cell, goal, greedy)
                }
            };
            match params.controller {
                ControllerKind::Risc => should_switch(
                    t_now,
                    moved_to,
                    ctx.goal,
                    ctx.check_switch,
                    competency,
                    &params.switch_cfg,
                    &mut rngs.switching,
                ),
                ControllerKind::Fbrl => should_switch(
                    t_now,
                    moved_to,
                    ctx.goal,
                    false,
                    competency,
                    &params.switch_cfg,
                    &mut rngs.switching,
                ),
                ControllerKind::ReverseCurriculum => rc_should_switch(
                    t_now,
                    moved_to,
                    ctx.goal,
                    competency,
                    params.rc_threshold,
                    &params.switch_cfg,
                ),
                ControllerKind::Naive => {
                    if success(moved_to, ctx.goal) {
                        (SwitchDecision::go(SwitchReason::GoalReached), None)
                    } else {
                        (SwitchDecision::stay(), None)
                    }
                }
                ControllerKind::EpisodicOracle => {
                    if success(moved_to, ctx.goal) {
                        (SwitchDecision::go(SwitchReason::GoalReached), None)
                    } else if t_now >= params.deployment.eval_episode_limit {
                        (SwitchDecision::go(SwitchReason::Truncated), None)
                    } else {
                        (SwitchDecision::stay(), None)
                    }
                }
            }
        };

        let terminal = decision.reason == SwitchReason::GoalReached;
        // A boundary follows this transition if the controller switches or
        // the environment's scheduled hard reset fired.
        let boundary = decision.switch || outcome.hard_reset;
        let truncated = boundary && !terminal;

        learner.store(Transition {
            cell: state.agent_cell,
            goal: ctx.goal,
            action,
            reward: reward(moved_to, ctx.goal),
            next_cell: moved_to,
            terminal,
            truncated,
        });
        if let Some(batch) = learner.train_step(&mut rngs.replay) {
            let q = learner.q();
            critic.update(&batch, |cell, goal_kind| q.greedy_action(cell, goal_kind));
        }

        let reason = if decision.switch {
            decision.reason
        } else if outcome.hard_reset {
            SwitchReason::Truncated
        } else {
            SwitchReason::None
        };
        log.steps.push(StepRecord {
            step,
            cell: moved_to,
            goal_kind: ctx.goal.kind,
            epsilon,
            replay_size: learner.replay().len(),
            boundary: boundary.then_some(BoundaryRecord {
                traj_len: t_now,
                reason,
            }),
        });
        if probe.is_some() || boundary {
            log.trace.push(TraceRecord {
                step,
                t: t_now,
                reason,
                probe,
                switched: boundary,
            });
        }

        // Trajectory bookkeeping.
        if outcome.hard_reset {
            // Forced return to the initial state: a fresh forward
            // trajectory regardless of the controller.
            state = outcome.state;
            ctx = TrajectoryContext {
                goal: spec.goal(GoalKind::Forward),
                t: 0,
                check_switch: is_risc && begin_trajectory(&params.switch_cfg, &mut rngs.switching),
            };
        } else if decision.switch {
            match params.controller {
                ControllerKind::Risc => {
                    ctx = switch_goals(&ctx, spec, &params.switch_cfg, true, &mut rngs.switching);
                    state = outcome.state;
                }
                ControllerKind::Fbrl | ControllerKind::ReverseCurriculum => {
                    ctx = switch_goals(&ctx, spec, &params.switch_cfg, false, &mut rngs.switching);
                    state = outcome.state;
                }
                ControllerKind::Naive => {
                    // Goal kind never changes; only the trajectory resets.
                    ctx.t = 0;
                    state = outcome.state;
                }
                ControllerKind::EpisodicOracle => {
                    // Episodic regime: boundaries reset the environment.
                    state = env.hard_reset();
                    ctx.t = 0;
                }
            }
        } else {
            ctx.t = t_now;
            state = outcome.state;
        }

        let done = step + 1;
        if params.eval_cadence > 0 && done % params.eval_cadence == 0 {
            log.evals.extend(metrics::evaluate(
                spec,
                learner.q(),
                done,
                params.eval_episodes,
                params.deployment.eval_episode_limit,
            ));
        }
        if params.snapshot_steps.contains(&done) {
            log.snapshots.push(Snapshot {
                step: done,
                q: learner.q().clone(),
                qf: critic.qf().clone(),
            });
        }
    }
    log
}
