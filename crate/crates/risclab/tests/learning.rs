//! Slower learning-dynamics checks that need full training runs.

use risclab::env::{DeploymentConfig, GoalKind, GridSpec};
use risclab::learner::{AgentConfig, Learner};
use risclab::oracle;
use risclab::seeding::RngStreams;
use risclab::success_critic::SuccessCritic;
use risclab::switching::{run_training, ControllerKind, RunParams, SwitchConfig};

fn params(controller: ControllerKind, eval_cadence: u64) -> RunParams<'static> {
    RunParams {
        controller,
        switch_cfg: SwitchConfig::four_rooms_defaults(),
        deployment: DeploymentConfig::default(),
        rc_threshold: 0.2,
        eps_mixture_competency: false,
        eval_cadence,
        eval_episodes: 10,
        snapshot_steps: &[],
    }
}

/// Episodic ε-greedy Q-learning on the four-rooms grid converges to the
/// optimal values on well-visited states.
#[test]
fn episodic_q_learning_tracks_oracle_values() {
    let spec = GridSpec::four_rooms();
    let agent = AgentConfig {
        learning_rate: 0.1,
        ..AgentConfig::default()
    };
    let mut learner = Learner::new(&spec, agent);
    let mut critic = SuccessCritic::new(&spec, agent.gamma, 0.1, agent.target_sync_every);
    let mut rngs = RngStreams::from_root(3);
    let log = run_training(
        &spec,
        &mut learner,
        &mut critic,
        &params(ControllerKind::EpisodicOracle, 10_000),
        &mut rngs,
    );

    let mut visits = vec![0u32; spec.num_cells()];
    for rec in &log.steps {
        visits[spec.cell_index(rec.cell)] += 1;
    }
    let goal = spec.goal(GoalKind::Forward);
    let values = oracle::value_iteration(&spec, goal, agent.gamma, 1e-12).unwrap();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for cell in spec.free_cells() {
        if cell == goal.cell || visits[spec.cell_index(cell)] < 100 {
            continue;
        }
        let err = (learner.q().max_q(cell, GoalKind::Forward) - values.value(cell)).abs();
        worst = worst.max(err);
        checked += 1;
        assert!(err < 0.05, "cell {cell}: max-norm error {err}");
    }
    assert!(checked > 50, "only {checked} states were visited 100+ times");
    println!("checked {checked} states, worst error {worst:.4}");
}

/// Evaluation is side-effect free: enabling it changes neither the
/// learned tables nor the replay contents nor any RNG stream.
#[test]
fn evaluation_does_not_perturb_training() {
    let spec = GridSpec::four_rooms();
    let agent = AgentConfig {
        learning_rate: 0.1,
        ..AgentConfig::default()
    };
    let deployment = DeploymentConfig {
        total_train_steps: 4_000,
        hard_reset_frequency: 4_000,
        eval_episode_limit: 100,
    };

    let mut outcomes = Vec::new();
    for eval_cadence in [500, 1_000_000] {
        let p = RunParams {
            deployment,
            ..params(ControllerKind::Risc, eval_cadence)
        };
        let mut learner = Learner::new(&spec, agent);
        let mut critic = SuccessCritic::new(&spec, agent.gamma, 0.1, agent.target_sync_every);
        let mut rngs = RngStreams::from_root(11);
        let log = run_training(&spec, &mut learner, &mut critic, &p, &mut rngs);
        let replay: Vec<_> = learner.replay().iter().copied().collect();
        outcomes.push((log.steps.clone(), replay, learner.q().clone()));
    }
    assert_eq!(outcomes[0].0, outcomes[1].0, "step logs diverged");
    assert_eq!(outcomes[0].1, outcomes[1].1, "replay contents diverged");
    assert_eq!(outcomes[0].2, outcomes[1].2, "Q tables diverged");
}
