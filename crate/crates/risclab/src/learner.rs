//! Goal-conditioned Q-learning over a tabular backend.
//!
//! The training loop is DQN-shaped — uniform replay, a hard-synced target
//! table, linearly annealed ε-greedy exploration — but the function class
//! is an exact table over (cell, goal, action), which keeps every
//! algorithmic claim testable without approximation error.
//!
//! The two timeout bootstrap strategies differ only in how the target
//! treats a truncated transition: [`BootstrapStrategy::TimeoutNonterminal`]
//! bootstraps the successor state regardless of truncation, while
//! [`BootstrapStrategy::TimeoutTerminal`] zeroes the bootstrap term when
//! the trajectory was cut. True terminals (goal reached) never bootstrap.

use crate::env::{Action, Cell, Goal, GoalKind, GridSpec, ACTIONS, NUM_ACTIONS};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How to bootstrap the last transition of a truncated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapStrategy {
    /// Keep the bootstrap term: targets stay consistent no matter when
    /// the controller cuts a trajectory.
    TimeoutNonterminal,
    /// Treat the cut as terminal: the target drops the successor value.
    TimeoutTerminal,
}

/// One environment step as stored in replay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub cell: Cell,
    pub goal: Goal,
    pub action: Action,
    pub reward: f64,
    pub next_cell: Cell,
    /// Goal reached: a true terminal, never bootstrapped.
    pub terminal: bool,
    /// Trajectory cut by a switch or timeout; never set together with
    /// `terminal`.
    pub truncated: bool,
}

/// Fixed-capacity ring buffer with uniform with-replacement sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            storage: Vec::with_capacity(capacity),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends, evicting the oldest entry once full.
    pub fn push(&mut self, tr: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(tr);
        } else {
            self.storage[self.next] = tr;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample of `n` transitions, with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<Transition> {
        assert!(!self.storage.is_empty(), "cannot sample from empty replay");
        (0..n)
            .map(|_| self.storage[rng.gen_range(0..self.storage.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}

/// Dense action-value table over (goal, cell, action).
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(spec: &GridSpec) -> Self {
        Self {
            width: spec.width(),
            height: spec.height(),
            values: vec![0.0; spec.width() * spec.height() * 2 * NUM_ACTIONS],
        }
    }

    fn index(&self, cell: Cell, goal: GoalKind, action: Action) -> usize {
        debug_assert!(cell.row < self.height && cell.col < self.width);
        ((goal.index() * self.height + cell.row) * self.width + cell.col) * NUM_ACTIONS
            + action.index()
    }

    pub fn get(&self, cell: Cell, goal: GoalKind, action: Action) -> f64 {
        self.values[self.index(cell, goal, action)]
    }

    pub fn set(&mut self, cell: Cell, goal: GoalKind, action: Action, value: f64) {
        let idx = self.index(cell, goal, action);
        self.values[idx] = value;
    }

    pub fn nudge(&mut self, cell: Cell, goal: GoalKind, action: Action, lr: f64, target: f64) {
        let idx = self.index(cell, goal, action);
        self.values[idx] += lr * (target - self.values[idx]);
    }

    pub fn max_q(&self, cell: Cell, goal: GoalKind) -> f64 {
        ACTIONS
            .iter()
            .map(|&a| self.get(cell, goal, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties break toward the lowest action index.
    pub fn greedy_action(&self, cell: Cell, goal: GoalKind) -> Action {
        let mut best = ACTIONS[0];
        let mut best_q = self.get(cell, goal, best);
        for &a in &ACTIONS[1..] {
            let q = self.get(cell, goal, a);
            if q > best_q {
                best = a;
                best_q = q;
            }
        }
        best
    }
}

/// Base-agent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub target_sync_every: u64,
    pub initial_collect: usize,
    pub replay_capacity: usize,
    pub eps_init: f64,
    pub eps_end: f64,
    pub eps_decay_steps: u64,
    pub bootstrap_strategy: BootstrapStrategy,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            learning_rate: 1e-3,
            batch_size: 128,
            target_sync_every: 500,
            initial_collect: 512,
            replay_capacity: 50_000,
            eps_init: 1.0,
            eps_end: 0.1,
            eps_decay_steps: 10_000,
            bootstrap_strategy: BootstrapStrategy::TimeoutNonterminal,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if self.learning_rate <= 0.0 {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_sync_every == 0 {
            return Err("batch_size, replay_capacity and target_sync_every must be positive".into());
        }
        if self.eps_init < self.eps_end {
            return Err(format!(
                "eps_init ({}) must be at least eps_end ({})",
                self.eps_init, self.eps_end
            ));
        }
        if !(0.0..=1.0).contains(&self.eps_init) || !(0.0..=1.0).contains(&self.eps_end) {
            return Err("epsilon bounds must lie in [0,1]".into());
        }
        if self.eps_decay_steps == 0 {
            return Err("eps_decay_steps must be positive".into());
        }
        Ok(())
    }

    /// Linear ε schedule: `eps_init → eps_end` over `eps_decay_steps`,
    /// then flat.
    pub fn epsilon(&self, step: u64) -> f64 {
        let frac = (step as f64 / self.eps_decay_steps as f64).min(1.0);
        self.eps_init + (self.eps_end - self.eps_init) * frac
    }
}

/// The TD target for one transition under the given strategy.
pub fn td_target(
    tr: &Transition,
    strategy: BootstrapStrategy,
    target_q: &QTable,
    gamma: f64,
) -> f64 {
    if tr.terminal {
        return tr.reward;
    }
    let bootstrap = target_q.max_q(tr.next_cell, tr.goal.kind);
    match strategy {
        BootstrapStrategy::TimeoutNonterminal => tr.reward + gamma * bootstrap,
        BootstrapStrategy::TimeoutTerminal => {
            let d = if tr.truncated { 1.0 } else { 0.0 };
            tr.reward + gamma * (1.0 - d) * bootstrap
        }
    }
}

/// Tabular Q-learner with replay and a hard-synced target table.
///
/// Single-owner; update sequentially. Parallel runs use independent
/// learners.
#[derive(Debug, Clone)]
pub struct Learner {
    config: AgentConfig,
    q: QTable,
    target_q: QTable,
    replay: ReplayBuffer,
    updates_since_sync: u64,
    update_count: u64,
}

impl Learner {
    pub fn new(spec: &GridSpec, config: AgentConfig) -> Self {
        let q = QTable::zeros(spec);
        Self {
            target_q: q.clone(),
            q,
            replay: ReplayBuffer::new(config.replay_capacity),
            config,
            updates_since_sync: 0,
            update_count: 0,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    /// Adjusts the step size mid-stream; used by convergence studies that
    /// anneal after a burn-in phase.
    pub fn set_learning_rate(&mut self, lr: f64) {
        assert!(lr >= 0.0);
        self.config.learning_rate = lr;
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn target_q(&self) -> &QTable {
        &self.target_q
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn updates_since_sync(&self) -> u64 {
        self.updates_since_sync
    }

    /// ε-greedy action for the annealed schedule at `step`. Exploitation
    /// breaks Q-ties uniformly at random: a zero-initialized table would
    /// otherwise pin the agent to one action everywhere, which no
    /// randomly initialized function approximator does.
    pub fn act(&self, cell: Cell, goal: Goal, step: u64, rng: &mut impl Rng) -> Action {
        let eps = self.config.epsilon(step);
        if rng.gen::<f64>() < eps {
            return ACTIONS[rng.gen_range(0..NUM_ACTIONS)];
        }
        let best = self.q.max_q(cell, goal.kind);
        let ties: Vec<Action> = ACTIONS
            .iter()
            .copied()
            .filter(|&a| self.q.get(cell, goal.kind, a) == best)
            .collect();
        if ties.len() == 1 {
            ties[0]
        } else {
            ties[rng.gen_range(0..ties.len())]
        }
    }

    /// Greedy action from the online table (evaluation policy).
    pub fn greedy_action(&self, cell: Cell, goal: Goal) -> Action {
        self.q.greedy_action(cell, goal.kind)
    }

    /// Stores one freshly collected transition.
    pub fn store(&mut self, tr: Transition) {
        debug_assert!(
            !(tr.terminal && tr.truncated),
            "terminal and truncated are mutually exclusive"
        );
        self.replay.push(tr);
    }

    /// Seeds the replay before training begins (demonstration preload).
    pub fn preload(&mut self, transitions: impl IntoIterator<Item = Transition>) {
        for tr in transitions {
            self.replay.push(tr);
        }
    }

    /// Applies one TD update per transition in the batch, then handles
    /// the target-sync cadence. One call is one learner update.
    pub fn update(&mut self, batch: &[Transition]) {
        let lr = self.config.learning_rate;
        let gamma = self.config.gamma;
        for tr in batch {
            let target = td_target(tr, self.config.bootstrap_strategy, &self.target_q, gamma);
            self.q.nudge(tr.cell, tr.goal.kind, tr.action, lr, target);
        }
        self.update_count += 1;
        self.updates_since_sync += 1;
        if self.updates_since_sync >= self.config.target_sync_every {
            self.sync_target();
        }
    }

    /// Copies the online table into the target table and resets the
    /// sync counter.
    pub fn sync_target(&mut self) {
        self.target_q = self.q.clone();
        self.updates_since_sync = 0;
    }

    /// One replayed training step: samples a batch and updates on it.
    /// A no-op until the replay holds `initial_collect` transitions.
    /// Returns the batch so the success critic can train on the same
    /// experience.
    pub fn train_step(&mut self, rng: &mut impl Rng) -> Option<Vec<Transition>> {
        if self.replay.len() < self.config.initial_collect {
            return None;
        }
        let batch = self.replay.sample(self.config.batch_size, rng);
        self.update(&batch);
        Some(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{GoalKind, GridSpec, GridWorld};
    use crate::oracle;
    use crate::seeding;
    use proptest::prelude::*;

    fn chain_spec() -> GridSpec {
        GridSpec::chain(4).unwrap()
    }

    fn tr(
        spec: &GridSpec,
        col: usize,
        next_col: usize,
        terminal: bool,
        truncated: bool,
    ) -> Transition {
        let goal = spec.goal(GoalKind::Forward);
        Transition {
            cell: Cell::new(0, col),
            goal,
            action: Action::Right,
            reward: if terminal { 1.0 } else { 0.0 },
            next_cell: Cell::new(0, next_col),
            terminal,
            truncated,
        }
    }

    #[test]
    fn epsilon_schedule_endpoints_and_midpoint() {
        let cfg = AgentConfig::default();
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(5_000) - 0.55).abs() < 1e-12);
        assert!((cfg.epsilon(10_000) - 0.1).abs() < 1e-12);
        assert!((cfg.epsilon(1_000_000) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn td_target_strategies() {
        let spec = chain_spec();
        let mut target_q = QTable::zeros(&spec);
        target_q.set(Cell::new(0, 2), GoalKind::Forward, Action::Right, 1.0);

        let truncated = tr(&spec, 1, 2, false, true);
        let n = td_target(
            &truncated,
            BootstrapStrategy::TimeoutNonterminal,
            &target_q,
            0.95,
        );
        assert!((n - 0.95).abs() < 1e-12);
        let t = td_target(
            &truncated,
            BootstrapStrategy::TimeoutTerminal,
            &target_q,
            0.95,
        );
        assert_eq!(t, 0.0);

        let terminal = tr(&spec, 2, 3, true, false);
        for strategy in [
            BootstrapStrategy::TimeoutNonterminal,
            BootstrapStrategy::TimeoutTerminal,
        ] {
            assert_eq!(td_target(&terminal, strategy, &target_q, 0.95), 1.0);
        }
    }

    #[test]
    fn full_step_update_hits_target_exactly() {
        let spec = chain_spec();
        let mut learner = Learner::new(
            &spec,
            AgentConfig {
                learning_rate: 1.0,
                ..AgentConfig::default()
            },
        );
        let t = tr(&spec, 2, 3, true, false);
        learner.update(&[t]);
        assert_eq!(learner.q().get(Cell::new(0, 2), GoalKind::Forward, Action::Right), 1.0);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let spec = chain_spec();
        let mut learner = Learner::new(
            &spec,
            AgentConfig {
                learning_rate: 0.0,
                ..AgentConfig::default()
            },
        );
        let before = learner.q().clone();
        learner.update(&[tr(&spec, 1, 2, false, false)]);
        assert_eq!(learner.q(), &before);
    }

    #[test]
    fn target_sync_cadence() {
        let spec = chain_spec();
        let mut learner = Learner::new(
            &spec,
            AgentConfig {
                target_sync_every: 3,
                learning_rate: 0.5,
                ..AgentConfig::default()
            },
        );
        let t = tr(&spec, 2, 3, true, false);
        learner.update(&[t]);
        assert_ne!(learner.target_q().get(t.cell, GoalKind::Forward, t.action), learner.q().get(t.cell, GoalKind::Forward, t.action));
        learner.update(&[t]);
        assert_eq!(learner.updates_since_sync(), 2);
        learner.update(&[t]); // third update fires the sync
        assert_eq!(learner.updates_since_sync(), 0);
        assert_eq!(learner.target_q(), learner.q());
    }

    #[test]
    fn preload_ring_semantics() {
        let spec = chain_spec();
        let mut learner = Learner::new(
            &spec,
            AgentConfig {
                replay_capacity: 10,
                ..AgentConfig::default()
            },
        );
        learner.preload(std::iter::empty());
        assert_eq!(learner.replay().len(), 0);
        let t = tr(&spec, 1, 2, false, false);
        learner.preload(std::iter::repeat_n(t, 7));
        assert_eq!(learner.replay().len(), 7);
        learner.preload(std::iter::repeat_n(t, 4));
        assert_eq!(learner.replay().len(), 10);
    }

    #[test]
    fn train_step_is_noop_before_initial_collect() {
        let spec = chain_spec();
        let mut learner = Learner::new(
            &spec,
            AgentConfig {
                initial_collect: 5,
                ..AgentConfig::default()
            },
        );
        let mut rng = seeding::stream(0, "replay");
        learner.store(tr(&spec, 1, 2, false, false));
        assert!(learner.train_step(&mut rng).is_none());
        assert_eq!(learner.update_count(), 0);
        for _ in 0..4 {
            learner.store(tr(&spec, 1, 2, false, false));
        }
        assert!(learner.train_step(&mut rng).is_some());
        assert_eq!(learner.update_count(), 1);
    }

    #[test]
    fn replay_sampling_is_uniform() {
        // Ten distinguishable items, tagged through the reward field.
        let spec = chain_spec();
        let mut replay = ReplayBuffer::new(10);
        for i in 0..10 {
            let mut t = tr(&spec, 1, 2, false, false);
            t.reward = i as f64;
            replay.push(t);
        }
        let mut rng = seeding::stream(123, "uniformity");
        let mut counts = [0u64; 10];
        let draws = 100_000usize;
        for s in replay.sample(draws, &mut rng) {
            counts[s.reward as usize] += 1;
        }
        let expect = draws as f64 / 10.0;
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - expect).abs() < 3.0 * sigma,
                "count {c} outside 3σ of {expect}"
            );
        }
    }

    /// Q-learning on the episodic chain converges to the oracle values.
    #[test]
    fn q_learning_converges_on_chain() {
        let spec = GridSpec::chain(5).unwrap();
        let goal = spec.goal(GoalKind::Forward);
        let config = AgentConfig {
            learning_rate: 0.2,
            initial_collect: 1,
            batch_size: 16,
            target_sync_every: 50,
            replay_capacity: 1_000,
            ..AgentConfig::default()
        };
        let mut learner = Learner::new(&spec, config);
        let mut env = GridWorld::new(spec.clone(), u64::MAX);
        let mut streams = seeding::RngStreams::from_root(9);
        let mut state = env.hard_reset();
        for step in 0..30_000u64 {
            let action = learner.act(state.agent_cell, goal, step, &mut streams.actions);
            let out = env.step(action);
            let terminal = out.moved_to == goal.cell;
            learner.store(Transition {
                cell: state.agent_cell,
                goal,
                action,
                reward: if terminal { 1.0 } else { 0.0 },
                next_cell: out.moved_to,
                terminal,
                truncated: false,
            });
            learner.train_step(&mut streams.replay);
            state = if terminal { env.hard_reset() } else { out.state };
        }
        let values = oracle::value_iteration(&spec, goal, config.gamma, 1e-12).unwrap();
        for cell in spec.free_cells() {
            if cell == goal.cell {
                continue;
            }
            let learned = learner.q().max_q(cell, GoalKind::Forward);
            assert!(
                (learned - values.value(cell)).abs() < 1e-3,
                "cell {cell}: learned {learned} vs oracle {}",
                values.value(cell)
            );
        }
    }

    proptest! {
        /// Flipping the truncated flag never changes the nonterminal target.
        #[test]
        fn nonterminal_target_ignores_truncation(
            col in 0usize..3,
            q_next in 0.0f64..1.0,
            reward in 0.0f64..1.0,
        ) {
            let spec = chain_spec();
            let mut target_q = QTable::zeros(&spec);
            target_q.set(Cell::new(0, col + 1), GoalKind::Forward, Action::Left, q_next);
            let mut t = tr(&spec, col, col + 1, false, false);
            t.reward = reward;
            let plain = td_target(&t, BootstrapStrategy::TimeoutNonterminal, &target_q, 0.95);
            t.truncated = true;
            let cut = td_target(&t, BootstrapStrategy::TimeoutNonterminal, &target_q, 0.95);
            prop_assert_eq!(plain, cut);
        }
    }
}
