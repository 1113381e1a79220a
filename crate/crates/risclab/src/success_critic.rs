//! Success critic: a competency estimate for the current policy.
//!
//! Structurally this is exactly a Q-function whose reward *and*
//! termination both come from the success indicator `f(s', g)`: the update
//! target is `f + (1 − f)·γ_sc·Q̂_F(s', a', g)` with `a'` drawn from the
//! policy being scored. Its converged value under an optimal policy at
//! BFS distance `d` is `γ_sc^(d−1)`, strictly decreasing in distance, so
//! the controller can read it as "how close to mastered is this
//! state-goal pair".
//!
//! The critic trains on the same replayed batches as the agent critic and
//! shares its discount factor, so the score tracks the policy the agent
//! actually runs.

use crate::env::{success, Action, Cell, Goal, GoalKind, GridSpec, ACTIONS, NUM_ACTIONS};
use crate::learner::{QTable, Transition};

/// Tabular success critic with a hard-synced target table.
///
/// Values are clamped to the unit interval; single-owner, updated in
/// lockstep with the agent critic.
#[derive(Debug, Clone)]
pub struct SuccessCritic {
    qf: QTable,
    target_qf: QTable,
    gamma_sc: f64,
    learning_rate: f64,
    sync_every: u64,
    updates_since_sync: u64,
}

impl SuccessCritic {
    pub fn new(spec: &GridSpec, gamma_sc: f64, learning_rate: f64, sync_every: u64) -> Self {
        assert!(gamma_sc > 0.0 && gamma_sc < 1.0, "gamma_sc must lie in (0,1)");
        assert!(sync_every > 0);
        let qf = QTable::zeros(spec);
        Self {
            target_qf: qf.clone(),
            qf,
            gamma_sc,
            learning_rate,
            sync_every,
            updates_since_sync: 0,
        }
    }

    pub fn gamma_sc(&self) -> f64 {
        self.gamma_sc
    }

    pub fn qf(&self) -> &QTable {
        &self.qf
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        assert!(lr >= 0.0);
        self.learning_rate = lr;
    }

    /// One update over a batch; `policy` supplies the successor action
    /// `a'` (the agent's greedy action during training, or a frozen
    /// policy in calibration studies). Timeouts are always bootstrapped
    /// here; only success masks the recursion.
    pub fn update(&mut self, batch: &[Transition], policy: impl Fn(Cell, GoalKind) -> Action) {
        for tr in batch {
            let f = if success(tr.next_cell, tr.goal) { 1.0 } else { 0.0 };
            let target = if f >= 1.0 {
                1.0
            } else {
                let next_action = policy(tr.next_cell, tr.goal.kind);
                self.gamma_sc * self.target_qf.get(tr.next_cell, tr.goal.kind, next_action)
            };
            let current = self.qf.get(tr.cell, tr.goal.kind, tr.action);
            let updated = (current + self.learning_rate * (target - current)).clamp(0.0, 1.0);
            self.qf.set(tr.cell, tr.goal.kind, tr.action, updated);
        }
        self.updates_since_sync += 1;
        if self.updates_since_sync >= self.sync_every {
            self.sync_target();
        }
    }

    pub fn sync_target(&mut self) {
        self.target_qf = self.qf.clone();
        self.updates_since_sync = 0;
    }

    /// Competency under a greedy policy: the critic value at the policy's
    /// action.
    pub fn competency(&self, cell: Cell, goal: Goal, policy_action: Action) -> f64 {
        self.qf.get(cell, goal.kind, policy_action)
    }

    /// Competency under the ε-greedy mixture: the exact expectation of the
    /// critic over the ε-mixed action distribution.
    pub fn competency_eps_mixture(
        &self,
        cell: Cell,
        goal: Goal,
        greedy_action: Action,
        eps: f64,
    ) -> f64 {
        let uniform: f64 = ACTIONS
            .iter()
            .map(|&a| self.qf.get(cell, goal.kind, a))
            .sum::<f64>()
            / NUM_ACTIONS as f64;
        eps * uniform + (1.0 - eps) * self.qf.get(cell, goal.kind, greedy_action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::GridSpec;
    use crate::oracle;

    fn forward_tr(spec: &GridSpec, cell: Cell, action: Action, next: Cell) -> Transition {
        let goal = spec.goal(GoalKind::Forward);
        Transition {
            cell,
            goal,
            action,
            reward: if next == goal.cell { 1.0 } else { 0.0 },
            next_cell: next,
            terminal: next == goal.cell,
            truncated: false,
        }
    }

    #[test]
    fn success_next_state_targets_one() {
        let spec = GridSpec::chain(3).unwrap();
        let mut critic = SuccessCritic::new(&spec, 0.95, 1.0, 500);
        let t = forward_tr(&spec, Cell::new(0, 1), Action::Right, Cell::new(0, 2));
        critic.update(&[t], |_, _| Action::Right);
        assert_eq!(critic.qf().get(Cell::new(0, 1), GoalKind::Forward, Action::Right), 1.0);
    }

    #[test]
    fn bootstrap_target_scales_by_gamma() {
        let spec = GridSpec::chain(4).unwrap();
        let mut critic = SuccessCritic::new(&spec, 0.95, 1.0, 500);
        // Plant target value 1.0 at the successor and sync it into the
        // target table.
        let near = forward_tr(&spec, Cell::new(0, 2), Action::Right, Cell::new(0, 3));
        critic.update(&[near], |_, _| Action::Right);
        critic.sync_target();
        let far = forward_tr(&spec, Cell::new(0, 1), Action::Right, Cell::new(0, 2));
        critic.update(&[far], |_, _| Action::Right);
        assert!(
            (critic.qf().get(Cell::new(0, 1), GoalKind::Forward, Action::Right) - 0.95).abs()
                < 1e-12
        );
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let spec = GridSpec::chain(4).unwrap();
        let mut critic = SuccessCritic::new(&spec, 0.95, 1.0, 1);
        for _ in 0..100 {
            let t = forward_tr(&spec, Cell::new(0, 2), Action::Right, Cell::new(0, 3));
            critic.update(&[t], |_, _| Action::Right);
            let v = critic.qf().get(Cell::new(0, 2), GoalKind::Forward, Action::Right);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn competency_reads_policy_action() {
        let spec = GridSpec::chain(3).unwrap();
        let mut critic = SuccessCritic::new(&spec, 0.95, 1.0, 500);
        let goal = spec.goal(GoalKind::Forward);
        assert_eq!(critic.competency(Cell::new(0, 0), goal, Action::Right), 0.0);
        let t = forward_tr(&spec, Cell::new(0, 1), Action::Right, Cell::new(0, 2));
        critic.update(&[t], |_, _| Action::Right);
        assert_eq!(critic.competency(Cell::new(0, 1), goal, Action::Right), 1.0);
        assert_eq!(critic.competency(Cell::new(0, 1), goal, Action::Left), 0.0);
    }

    #[test]
    fn uniform_table_is_mixture_invariant() {
        let spec = GridSpec::chain(3).unwrap();
        let mut critic = SuccessCritic::new(&spec, 0.95, 1.0, 500);
        let goal = spec.goal(GoalKind::Forward);
        let cell = Cell::new(0, 1);
        // Write 0.7 for every action by driving full-step updates against
        // a planted target table.
        for &a in &ACTIONS {
            critic.qf.set(cell, goal.kind, a, 0.7);
        }
        for eps in [0.0, 0.3, 1.0] {
            let v = critic.competency_eps_mixture(cell, goal, Action::Up, eps);
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    /// The update is exactly a Q-update whose reward and termination both
    /// come from the success indicator, with the successor action chosen
    /// by the policy.
    #[test]
    fn update_is_a_q_update_driven_by_the_success_function() {
        use crate::learner::{td_target, BootstrapStrategy};
        let spec = GridSpec::chain(4).unwrap();
        let mut critic = SuccessCritic::new(&spec, 0.95, 1.0, 500);
        // Make the bootstrap value visible to both paths.
        critic.target_qf.set(Cell::new(0, 2), GoalKind::Forward, Action::Right, 0.8);

        for (next_col, expect_f) in [(2usize, 0.0), (3usize, 1.0)] {
            let tr = forward_tr(&spec, Cell::new(0, 1), Action::Right, Cell::new(0, next_col));
            // Mirror transition for a plain Q-learner: reward and terminal
            // flag both equal f(s', g). Right is the argmax of target_qf at
            // the successor, so the max-based target coincides with the
            // policy-action target.
            let mirrored = Transition {
                reward: expect_f,
                terminal: expect_f == 1.0,
                ..tr
            };
            let q_target = td_target(
                &mirrored,
                BootstrapStrategy::TimeoutNonterminal,
                &critic.target_qf,
                0.95,
            );
            let mut fresh = critic.clone();
            fresh.update(&[tr], |_, _| Action::Right);
            let got = fresh.qf.get(Cell::new(0, 1), GoalKind::Forward, Action::Right);
            assert_eq!(got, q_target, "next_col {next_col}");
        }
    }

    /// Under a frozen policy each full sweep contracts the sup-norm
    /// distance to the analytic fixed point.
    #[test]
    fn frozen_policy_sweeps_contract() {
        let spec = GridSpec::chain(6).unwrap();
        let goal = spec.goal(GoalKind::Forward);
        let mut critic = SuccessCritic::new(&spec, 0.95, 0.3, 1);
        let batch: Vec<Transition> = (0..5)
            .map(|c| forward_tr(&spec, Cell::new(0, c), Action::Right, Cell::new(0, c + 1)))
            .collect();
        let sup_dist = |critic: &SuccessCritic| -> f64 {
            (0..5)
                .map(|c| {
                    let expect = oracle::optimal_competency(5 - c as i64, 0.95).unwrap();
                    (critic.competency(Cell::new(0, c), goal, Action::Right) - expect).abs()
                })
                .fold(0.0, f64::max)
        };
        let mut prev = sup_dist(&critic);
        for _ in 0..60 {
            critic.update(&batch, |_, _| Action::Right);
            let now = sup_dist(&critic);
            assert!(now <= prev + 1e-12, "sup distance rose from {prev} to {now}");
            prev = now;
        }
        assert!(prev < 0.02, "did not converge: sup distance {prev}");
    }

    /// Frozen optimal policy on a corridor: the converged competency at
    /// distance 3 is the analytic fixed point 0.9025.
    #[test]
    fn corridor_convergence_matches_fixed_point() {
        let spec = GridSpec::chain(4).unwrap();
        let goal = spec.goal(GoalKind::Forward);
        let mut critic = SuccessCritic::new(&spec, 0.95, 0.5, 1);
        let batch: Vec<Transition> = (0..3)
            .map(|c| forward_tr(&spec, Cell::new(0, c), Action::Right, Cell::new(0, c + 1)))
            .collect();
        for _ in 0..200 {
            critic.update(&batch, |_, _| Action::Right);
        }
        let expect = oracle::optimal_competency(3, 0.95).unwrap();
        let got = critic.competency(Cell::new(0, 0), goal, Action::Right);
        assert!((got - expect).abs() < 1e-6, "got {got}, expected {expect}");
        assert!((got - 0.9025).abs() < 1e-6);
    }
}
