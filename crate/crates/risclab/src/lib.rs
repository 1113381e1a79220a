//! Reset-free reinforcement learning laboratory.
//!
//! Everything needed to train and analyze goal-conditioned Q-learning agents
//! in the reset-free ("deployment") regime on deterministic gridworlds:
//!
//! - [`env`](mod@env) — gridworld environments with forward/reset goals, rare hard
//!   resets, binary-plane observations, and a plain-text map format.
//! - [`oracle`] — exact ground truth (BFS distances, value iteration, the
//!   analytic competency fixed point) used by tests and diagnostics.
//! - [`learner`] — tabular goal-conditioned Q-learning with replay, a hard-
//!   synced target table, ε-greedy exploration, and both timeout bootstrap
//!   strategies (bootstrap truncated states or treat them as terminal).
//! - [`success_critic`] — the competency estimator trained from the success
//!   indicator on the same batches as the agent critic.
//! - [`switching`] — the intelligent-switching controller and the
//!   forward-backward / reverse-curriculum / naive / episodic baselines.
//! - [`metrics`] — evaluation protocol, OVPD, IQM, stratified bootstrap
//!   confidence intervals, AUC, and visitation heatmaps.
//! - [`harness`] — configuration, seeding, run/sweep orchestration, and
//!   report generation (CSV + JSON + SVG).
//!
//! Determinism is the master invariant: a run is a pure function of its
//! configuration and root seed, down to the bytes of every output file.

pub mod env;
pub mod harness;
pub mod learner;
pub mod metrics;
pub mod oracle;
pub mod seeding;
pub mod success_critic;
pub mod svg;
pub mod switching;
