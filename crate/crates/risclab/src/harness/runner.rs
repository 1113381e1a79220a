//! Executes one configured run and materializes its artifacts.
//!
//! A run directory contains the canonical config, per-step training and
//! position logs, the evaluation log, the switch-decision trace, final
//! (and optionally mid-run) Q and competency tables, and a manifest tying
//! everything to the config hash and seed. Every byte is a pure function
//! of (config, seed).

use crate::env::{Cell, GoalKind, GridSpec};
use crate::harness::config::{ConfigError, ExperimentConfig};
use crate::learner::{Learner, QTable};
use crate::metrics::EvalRecord;
use crate::seeding::RngStreams;
use crate::success_critic::SuccessCritic;
use crate::switching::{run_training, RunParams, SwitchReason, TrainingLog};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("CSV error on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("malformed run directory {dir}: {reason}")]
    MalformedRunDir { dir: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Manifest written alongside every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub app_version: String,
    /// "complete" when all artifacts landed, "partial" otherwise.
    pub status: String,
    pub files: Vec<String>,
}

/// Handle to a finished run on disk.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub label: String,
}

/// Conventional directory for a seed under an experiment root.
pub fn run_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed_{seed:04}"))
}

/// Runs `config` with `seed` and writes all artifacts under `dir`.
pub fn run(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<RunSummary, RunError> {
    config.validate()?;
    let spec = config.env.build()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let result = execute_and_write(config, seed, dir, &spec);
    let status = if result.is_ok() { "complete" } else { "partial" };
    write_manifest(config, seed, dir, status)?;
    result?;

    Ok(RunSummary {
        dir: dir.to_path_buf(),
        config_hash: config.hash(),
        seed,
        label: config.label(),
    })
}

fn execute_and_write(
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    spec: &GridSpec,
) -> Result<(), RunError> {
    let switch_cfg = config.switch.to_switch_config()?;
    let mut learner = Learner::new(spec, config.agent);
    let mut critic = SuccessCritic::new(
        spec,
        config.agent.gamma,
        config.success_critic.learning_rate,
        config.agent.target_sync_every,
    );
    let mut rngs = RngStreams::from_root(seed);
    let params = RunParams {
        controller: config.controller,
        switch_cfg,
        deployment: config.deployment,
        rc_threshold: config.switch.rc_threshold,
        eps_mixture_competency: config.switch.eps_mixture_competency,
        eval_cadence: config.eval.cadence,
        eval_episodes: config.eval.episodes,
        snapshot_steps: &config.snapshot_steps,
    };
    let log = run_training(spec, &mut learner, &mut critic, &params, &mut rngs);

    write_string(&dir.join("config.toml"), &config.to_canonical_toml())?;
    write_training_csv(&dir.join("training.csv"), &log)?;
    write_positions_csv(&dir.join("positions.csv"), &log)?;
    write_eval_csv(&dir.join("eval.csv"), &log.evals)?;
    write_trace_csv(&dir.join("switch_trace.csv"), &log)?;
    write_qtable_csv(&dir.join("qtable.csv"), spec, learner.q())?;
    write_qtable_csv(&dir.join("competency.csv"), spec, critic.qf())?;
    for snapshot in &log.snapshots {
        write_qtable_csv(
            &dir.join(format!("qtable_at_{:06}.csv", snapshot.step)),
            spec,
            &snapshot.q,
        )?;
        write_qtable_csv(
            &dir.join(format!("competency_at_{:06}.csv", snapshot.step)),
            spec,
            &snapshot.qf,
        )?;
    }
    Ok(())
}

fn write_manifest(
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    status: &str,
) -> Result<(), RunError> {
    let mut files: Vec<String> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|name| name != "manifest.json")
        .collect();
    files.sort();
    let manifest = Manifest {
        schema_version: crate::harness::config::SCHEMA_VERSION,
        config_hash: config.hash(),
        seed,
        app_version: env!("CARGO_PKG_VERSION").to_string(),
        status: status.to_string(),
        files,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_string(&path, &(text + "\n"))
}

fn write_string(path: &Path, text: &str) -> Result<(), RunError> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(text.as_bytes()).map_err(io_err(path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, RunError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), RunError> {
    w.flush().map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_training_csv(path: &Path, log: &TrainingLog) -> Result<(), RunError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record([
        "step",
        "goal_kind",
        "traj_len_at_boundary",
        "switch_reason",
        "epsilon",
        "replay_size",
    ])
    .map_err(wrap)?;
    for rec in &log.steps {
        let (len, reason) = match rec.boundary {
            Some(b) => (b.traj_len.to_string(), b.reason.as_str().to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            rec.step.to_string(),
            rec.goal_kind.as_str().to_string(),
            len,
            reason,
            format!("{:.6}", rec.epsilon),
            rec.replay_size.to_string(),
        ])
        .map_err(wrap)?;
    }
    finish(w, path)
}

fn write_positions_csv(path: &Path, log: &TrainingLog) -> Result<(), RunError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(["step", "cell_x", "cell_y", "goal_kind"]).map_err(wrap)?;
    for rec in &log.steps {
        w.write_record([
            rec.step.to_string(),
            rec.cell.col.to_string(),
            rec.cell.row.to_string(),
            rec.goal_kind.as_str().to_string(),
        ])
        .map_err(wrap)?;
    }
    finish(w, path)
}

fn write_eval_csv(path: &Path, evals: &[EvalRecord]) -> Result<(), RunError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(["train_step", "episode", "return", "success", "length"])
        .map_err(wrap)?;
    for rec in evals {
        w.write_record([
            rec.train_step.to_string(),
            rec.episode_index.to_string(),
            format!("{:.1}", rec.episode_return),
            if rec.success { "1" } else { "0" }.to_string(),
            rec.episode_length.to_string(),
        ])
        .map_err(wrap)?;
    }
    finish(w, path)
}

fn write_trace_csv(path: &Path, log: &TrainingLog) -> Result<(), RunError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(["step", "t", "reason", "competency", "lambda", "draw", "switched"])
        .map_err(wrap)?;
    for rec in &log.trace {
        let (c, lambda, draw) = match rec.probe {
            Some(p) => (
                format!("{:.10}", p.competency),
                format!("{:.10}", p.lambda),
                p.draw.map(|d| format!("{d:.10}")).unwrap_or_default(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            rec.step.to_string(),
            rec.t.to_string(),
            rec.reason.as_str().to_string(),
            c,
            lambda,
            draw,
            if rec.switched { "1" } else { "0" }.to_string(),
        ])
        .map_err(wrap)?;
    }
    finish(w, path)
}

/// Q-table CSV: one row per (cell, goal, action) over free cells in
/// row-major order. Shared by agent critic, success critic, and
/// mid-run snapshots.
pub fn write_qtable_csv(path: &Path, spec: &GridSpec, table: &QTable) -> Result<(), RunError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(["cell_x", "cell_y", "goal_kind", "action", "q"]).map_err(wrap)?;
    for cell in spec.free_cells() {
        for kind in [GoalKind::Forward, GoalKind::Reset] {
            for action in crate::env::ACTIONS {
                w.write_record([
                    cell.col.to_string(),
                    cell.row.to_string(),
                    kind.as_str().to_string(),
                    action.index().to_string(),
                    format!("{:.10}", table.get(cell, kind, action)),
                ])
                .map_err(wrap)?;
            }
        }
    }
    finish(w, path)
}

/// Reads a Q-table CSV back into a table over `spec`.
pub fn read_qtable_csv(path: &Path, spec: &GridSpec) -> Result<QTable, RunError> {
    let wrap = |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut table = QTable::zeros(spec);
    let mut reader = csv::Reader::from_path(path).map_err(wrap)?;
    for record in reader.records() {
        let record = record.map_err(wrap)?;
        let bad = |reason: &str| RunError::MalformedRunDir {
            dir: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let col: usize = record[0].parse().map_err(|_| bad("bad cell_x"))?;
        let row: usize = record[1].parse().map_err(|_| bad("bad cell_y"))?;
        let kind = match &record[2] {
            "forward" => GoalKind::Forward,
            "reset" => GoalKind::Reset,
            _ => return Err(bad("bad goal_kind")),
        };
        let action: usize = record[3].parse().map_err(|_| bad("bad action"))?;
        let q: f64 = record[4].parse().map_err(|_| bad("bad q"))?;
        let action = crate::env::Action::try_from(action)
            .map_err(|_| bad("action out of range"))?;
        table.set(Cell::new(row, col), kind, action, q);
    }
    Ok(table)
}

/// Row shape of `eval.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub train_step: u64,
    pub episode: u32,
    pub episode_return: f64,
    pub success: bool,
    pub length: u64,
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalRow>, RunError> {
    let wrap = |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |reason: &str| RunError::MalformedRunDir {
        dir: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut rows = Vec::new();
    let mut reader = csv::Reader::from_path(path).map_err(wrap)?;
    for record in reader.records() {
        let record = record.map_err(wrap)?;
        rows.push(EvalRow {
            train_step: record[0].parse().map_err(|_| bad("bad train_step"))?,
            episode: record[1].parse().map_err(|_| bad("bad episode"))?,
            episode_return: record[2].parse().map_err(|_| bad("bad return"))?,
            success: &record[3] == "1",
            length: record[4].parse().map_err(|_| bad("bad length"))?,
        });
    }
    Ok(rows)
}

/// Per-step boundary info parsed back from `training.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub step: u64,
    pub goal_kind: GoalKind,
    pub boundary_len: Option<u64>,
    pub reason: Option<SwitchReason>,
}

pub fn read_training_csv(path: &Path) -> Result<Vec<TrainingRow>, RunError> {
    let wrap = |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |reason: &str| RunError::MalformedRunDir {
        dir: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut rows = Vec::new();
    let mut reader = csv::Reader::from_path(path).map_err(wrap)?;
    for record in reader.records() {
        let record = record.map_err(wrap)?;
        let goal_kind = match &record[1] {
            "forward" => GoalKind::Forward,
            "reset" => GoalKind::Reset,
            _ => return Err(bad("bad goal_kind")),
        };
        let boundary_len = if record[2].is_empty() {
            None
        } else {
            Some(record[2].parse().map_err(|_| bad("bad traj_len"))?)
        };
        let reason = match &record[3] {
            "" => None,
            "goal_reached" => Some(SwitchReason::GoalReached),
            "truncated" => Some(SwitchReason::Truncated),
            "early_switch" => Some(SwitchReason::EarlySwitch),
            "none" => Some(SwitchReason::None),
            _ => return Err(bad("bad switch_reason")),
        };
        rows.push(TrainingRow {
            step: record[0].parse().map_err(|_| bad("bad step"))?,
            goal_kind,
            boundary_len,
            reason,
        });
    }
    Ok(rows)
}

/// Positions parsed back from `positions.csv` in heatmap-input shape.
pub fn read_positions_csv(path: &Path) -> Result<Vec<(u64, Cell, GoalKind)>, RunError> {
    let wrap = |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |reason: &str| RunError::MalformedRunDir {
        dir: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut rows = Vec::new();
    let mut reader = csv::Reader::from_path(path).map_err(wrap)?;
    for record in reader.records() {
        let record = record.map_err(wrap)?;
        let step: u64 = record[0].parse().map_err(|_| bad("bad step"))?;
        let col: usize = record[1].parse().map_err(|_| bad("bad cell_x"))?;
        let row: usize = record[2].parse().map_err(|_| bad("bad cell_y"))?;
        let kind = match &record[3] {
            "forward" => GoalKind::Forward,
            "reset" => GoalKind::Reset,
            _ => return Err(bad("bad goal_kind")),
        };
        rows.push((step, Cell::new(row, col), kind));
    }
    Ok(rows)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, RunError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| RunError::MalformedRunDir {
        dir: dir.to_path_buf(),
        reason: format!("bad manifest: {e}"),
    })
}

pub fn read_run_config(dir: &Path) -> Result<ExperimentConfig, RunError> {
    let path = dir.join("config.toml");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(ExperimentConfig::from_toml(&text, &[])?)
}
