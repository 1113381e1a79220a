//! Aggregates finished runs into a report bundle.
//!
//! Runs are grouped by config hash; groups must agree on environment,
//! training length, and evaluation protocol, otherwise aggregation is
//! refused with a diagnostic. Per group the report carries IQM and mean
//! (with stratified bootstrap confidence intervals) of the final
//! evaluation score and of the AUC, the mean trajectory length, a
//! learning-curve SVG with CI bands, and optional visitation/value
//! heatmaps at requested snapshot steps. The bundle is a pure function of
//! the run CSVs and the report seed.

use crate::harness::config::ExperimentConfig;
use crate::harness::runner::{self, RunError};
use crate::learner::BootstrapStrategy;
use crate::metrics::{self, AggregateStat, MetricsError, StatMethod};
use crate::seeding;
use crate::svg;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("no run directories given")]
    NoRuns,
    #[error("incompatible configs, refusing aggregation: {0}")]
    Incompatible(String),
    #[error("metrics error: {0}")]
    Metrics(#[from] MetricsError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("heatmap step {step} has no snapshot in {dir} (add it to snapshot_steps)")]
    MissingSnapshot { step: u64, dir: PathBuf },
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub reps: u32,
    pub level: f64,
    pub seed: u64,
    /// Render heatmaps for these snapshot steps.
    pub heatmap_steps: Vec<u64>,
    pub heatmap_window: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            reps: 2_000,
            level: 0.95,
            seed: 0,
            heatmap_steps: Vec::new(),
            heatmap_window: metrics::DEFAULT_HEATMAP_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StatPair {
    pub iqm: AggregateStat,
    pub mean: AggregateStat,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub label: String,
    pub config_hash: String,
    pub controller: String,
    pub bootstrap_strategy: String,
    pub seeds: Vec<u64>,
    /// Success rate at the final evaluation point.
    pub final_success: StatPair,
    /// Normalized area under the success-rate learning curve.
    pub auc: StatPair,
    pub mean_trajectory_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub reps: u32,
    pub level: f64,
    pub seed: u64,
    pub groups: Vec<GroupReport>,
}

struct LoadedRun {
    dir: PathBuf,
    config: ExperimentConfig,
    seed: u64,
    /// (train_step, success_rate) sorted by step.
    curve: Vec<(u64, f64)>,
    trajectory_lengths: Vec<u64>,
}

struct Group {
    config: ExperimentConfig,
    runs: Vec<LoadedRun>,
}

fn load_run(dir: &Path) -> Result<LoadedRun, ReportError> {
    let manifest = runner::read_manifest(dir)?;
    let config = runner::read_run_config(dir)?;
    let evals = runner::read_eval_csv(&dir.join("eval.csv"))?;
    let training = runner::read_training_csv(&dir.join("training.csv"))?;

    let mut by_step: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
    for row in &evals {
        let slot = by_step.entry(row.train_step).or_insert((0, 0));
        slot.1 += 1;
        if row.success {
            slot.0 += 1;
        }
    }
    let curve = by_step
        .into_iter()
        .map(|(step, (succ, total))| (step, f64::from(succ) / f64::from(total.max(1))))
        .collect();
    let trajectory_lengths = training.iter().filter_map(|r| r.boundary_len).collect();
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        config,
        seed: manifest.seed,
        curve,
        trajectory_lengths,
    })
}

fn check_compatibility(groups: &BTreeMap<String, Group>) -> Result<(), ReportError> {
    let mut iter = groups.values();
    let first = iter.next().expect("at least one group");
    let fc = &first.config;
    for group in iter {
        let gc = &group.config;
        let mut mismatches = Vec::new();
        if gc.env != fc.env {
            mismatches.push("env");
        }
        if gc.deployment.total_train_steps != fc.deployment.total_train_steps {
            mismatches.push("deployment.total_train_steps");
        }
        if gc.eval != fc.eval {
            mismatches.push("eval");
        }
        if !mismatches.is_empty() {
            return Err(ReportError::Incompatible(format!(
                "runs disagree on {}",
                mismatches.join(", ")
            )));
        }
    }
    Ok(())
}

fn stat_pair(samples: &[f64], opts: &ReportOptions, tag: &str) -> Result<StatPair, ReportError> {
    let per_task = vec![samples.to_vec()];
    let seed = seeding::derive_seed(opts.seed, tag);
    Ok(StatPair {
        iqm: metrics::bootstrap_ci(&per_task, StatMethod::Iqm, opts.reps, opts.level, seed)?,
        mean: metrics::bootstrap_ci(&per_task, StatMethod::Mean, opts.reps, opts.level, seed)?,
    })
}

/// Builds the report bundle for `run_dirs` and writes it under `out_dir`:
/// `aggregate.json`, `learning_curves.svg`, `trajectory_lengths.svg`, and
/// any requested heatmap SVGs.
pub fn report(
    run_dirs: &[PathBuf],
    out_dir: &Path,
    opts: &ReportOptions,
) -> Result<ReportBundle, ReportError> {
    if run_dirs.is_empty() {
        return Err(ReportError::NoRuns);
    }
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for dir in run_dirs {
        let run = load_run(dir)?;
        let hash = run.config.hash();
        groups
            .entry(hash)
            .or_insert_with(|| Group {
                config: run.config.clone(),
                runs: Vec::new(),
            })
            .runs
            .push(run);
    }
    check_compatibility(&groups)?;

    // Unique, stable labels: controller-strategy, with a hash prefix when
    // two distinct configs share one.
    let mut label_counts: BTreeMap<String, usize> = BTreeMap::new();
    for group in groups.values() {
        *label_counts.entry(group.config.label()).or_insert(0) += 1;
    }
    let labeled: Vec<(String, &Group, &String)> = groups
        .iter()
        .map(|(hash, group)| {
            let base = group.config.label();
            let label = if label_counts[&base] > 1 {
                format!("{base}-{}", &hash[..8])
            } else {
                base
            };
            (label, group, hash)
        })
        .collect();

    let mut bundle = ReportBundle {
        reps: opts.reps,
        level: opts.level,
        seed: opts.seed,
        groups: Vec::new(),
    };
    let mut curve_series = Vec::new();
    let mut traj_bars = Vec::new();

    for (i, (label, group, hash)) in labeled.iter().enumerate() {
        let mut runs: Vec<&LoadedRun> = group.runs.iter().collect();
        runs.sort_by_key(|r| r.seed);

        let finals: Vec<f64> = runs
            .iter()
            .map(|r| r.curve.last().map_or(0.0, |&(_, v)| v))
            .collect();
        let aucs: Vec<f64> = runs
            .iter()
            .map(|r| {
                let values: Vec<f64> = r.curve.iter().map(|&(_, v)| v).collect();
                metrics::auc(&values)
            })
            .collect::<Result<_, _>>()?;
        let traj_means: Vec<f64> = runs
            .iter()
            .map(|r| {
                if r.trajectory_lengths.is_empty() {
                    0.0
                } else {
                    r.trajectory_lengths.iter().sum::<u64>() as f64
                        / r.trajectory_lengths.len() as f64
                }
            })
            .collect();
        let mean_traj = traj_means.iter().sum::<f64>() / traj_means.len().max(1) as f64;

        bundle.groups.push(GroupReport {
            label: label.clone(),
            config_hash: (*hash).clone(),
            controller: group.config.controller.as_str().to_string(),
            bootstrap_strategy: match group.config.agent.bootstrap_strategy {
                BootstrapStrategy::TimeoutNonterminal => "timeout_nonterminal".to_string(),
                BootstrapStrategy::TimeoutTerminal => "timeout_terminal".to_string(),
            },
            seeds: runs.iter().map(|r| r.seed).collect(),
            final_success: stat_pair(&finals, opts, &format!("final:{label}"))?,
            auc: stat_pair(&aucs, opts, &format!("auc:{label}"))?,
            mean_trajectory_length: mean_traj,
        });

        // Mean curve across seeds with a per-point bootstrap band.
        let steps: Vec<u64> = runs
            .first()
            .map(|r| r.curve.iter().map(|&(s, _)| s).collect())
            .unwrap_or_default();
        let mut points = Vec::new();
        let mut band = Vec::new();
        for (pi, &step) in steps.iter().enumerate() {
            let at_step: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.curve.get(pi).map(|&(_, v)| v))
                .collect();
            let m = metrics::mean(&at_step)?;
            let stat = metrics::bootstrap_ci(
                &[at_step],
                StatMethod::Mean,
                opts.reps,
                opts.level,
                seeding::derive_seed(opts.seed, &format!("curve:{label}:{step}")),
            )?;
            points.push((step as f64, m));
            band.push((step as f64, stat.ci_low, stat.ci_high));
        }
        curve_series.push(svg::Series {
            label: label.clone(),
            color: svg::series_color(i).to_string(),
            points,
            band: Some(band),
        });
        traj_bars.push((label.clone(), mean_traj, None));

        for &step in &opts.heatmap_steps {
            let run = runs.first().expect("group has runs");
            write_heatmaps(run, label, step, opts.heatmap_window, out_dir)?;
        }
    }

    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let aggregate = serde_json::to_string_pretty(&bundle).expect("bundle serializes");
    write_text(&out_dir.join("aggregate.json"), &(aggregate + "\n"))?;
    write_text(
        &out_dir.join("learning_curves.svg"),
        &svg::line_chart(
            "Evaluation success rate",
            "training step",
            "success rate",
            &curve_series,
            Some((0.0, 1.0)),
        ),
    )?;
    write_text(
        &out_dir.join("trajectory_lengths.svg"),
        &svg::bar_chart("Mean trajectory length", "steps", &traj_bars),
    )?;
    Ok(bundle)
}

fn write_heatmaps(
    run: &LoadedRun,
    label: &str,
    step: u64,
    window: u64,
    out_dir: &Path,
) -> Result<(), ReportError> {
    let spec = run.config.env.build().map_err(RunError::Config)?;
    let snapshot_path = run.dir.join(format!("qtable_at_{step:06}.csv"));
    if !snapshot_path.exists() {
        return Err(ReportError::MissingSnapshot {
            step,
            dir: run.dir.clone(),
        });
    }
    let q = runner::read_qtable_csv(&snapshot_path, &spec)?;
    let visits = runner::read_positions_csv(&run.dir.join("positions.csv"))?;
    let window = metrics::heatmap(&visits, &q, &spec, step, window)?;

    let mut visit_values = Vec::with_capacity(spec.num_cells());
    let mut q_values = Vec::with_capacity(spec.num_cells());
    for r in 0..spec.height() {
        for c in 0..spec.width() {
            let cell = crate::env::Cell::new(r, c);
            if spec.is_wall(cell) {
                visit_values.push(None);
                q_values.push(None);
            } else {
                visit_values.push(Some(window.visits(cell) as f64));
                q_values.push(Some(window.max_q(cell, crate::env::GoalKind::Forward)));
            }
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_text(
        &out_dir.join(format!("heatmap_visits_{label}_{step:06}.svg")),
        &svg::grid_heatmap(
            &format!("{label}: forward visits after step {step}"),
            spec.width(),
            spec.height(),
            &visit_values,
        ),
    )?;
    write_text(
        &out_dir.join(format!("heatmap_q_{label}_{step:06}.svg")),
        &svg::grid_heatmap(
            &format!("{label}: greedy Q (forward) at step {step}"),
            spec.width(),
            spec.height(),
            &q_values,
        ),
    )?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}
