//! Hyperparameter sweeps: a base config plus a grid of dotted-path
//! overrides, enumerated as a Cartesian product in a fixed order.
//!
//! Cells are enumerated lexicographically: parameter paths sorted
//! ascending, the first path varying slowest, values in their listed
//! order. Cell directories are numbered in that order, so the on-disk
//! layout is identical no matter how many workers execute the sweep.
//! A failed cell is recorded and the rest of the sweep continues.

use crate::harness::config::{apply_override, ConfigError, ExperimentConfig};
use crate::harness::runner::{self, RunError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("I/O error writing sweep summary: {0}")]
    Summary(std::io::Error),
}

/// The modulation grid used when a sweep file lists no explicit grid:
/// conservative factor, minimum-length fraction, and trajectory gate.
pub fn default_grid() -> BTreeMap<String, Vec<toml::Value>> {
    let f = toml::Value::Float;
    BTreeMap::from([
        (
            "switch.beta".to_string(),
            vec![f(0.0), f(0.9), f(0.95)],
        ),
        (
            "switch.min_length_fraction".to_string(),
            vec![f(0.0), f(0.25), f(0.5), f(0.75)],
        ),
        (
            "switch.zeta".to_string(),
            vec![f(0.25), f(0.5), f(0.75), f(1.0)],
        ),
    ])
}

/// A sweep: base experiment plus per-parameter value lists.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    base: toml::Value,
    grid: BTreeMap<String, Vec<toml::Value>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    #[serde(default)]
    base: Option<toml::Value>,
    #[serde(default)]
    grid: Option<BTreeMap<String, Vec<toml::Value>>>,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self, SweepError> {
        let file: SweepFile = toml::from_str(text).map_err(ConfigError::Parse)?;
        let base = file
            .base
            .unwrap_or_else(|| toml::Value::Table(Default::default()));
        // Validate the base eagerly so a broken sweep fails before any cell
        // starts.
        let base_config: ExperimentConfig = base.clone().try_into().map_err(ConfigError::Parse)?;
        base_config.validate()?;
        let grid = match file.grid {
            Some(g) if !g.is_empty() => g,
            _ => default_grid(),
        };
        if grid.values().any(|v| v.is_empty()) {
            return Err(SweepError::EmptyGrid);
        }
        Ok(Self { base, grid })
    }

    pub fn from_path(path: &Path) -> Result<Self, SweepError> {
        let text = std::fs::read_to_string(path).map_err(|source| SweepError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_base(base: &ExperimentConfig, grid: BTreeMap<String, Vec<toml::Value>>) -> Self {
        let text = base.to_canonical_toml();
        Self {
            base: toml::from_str(&text).expect("canonical config parses"),
            grid,
        }
    }

    /// All cells in enumeration order, each as a validated config.
    pub fn enumerate_cells(&self) -> Result<Vec<ExperimentConfig>, SweepError> {
        let paths: Vec<&String> = self.grid.keys().collect();
        let sizes: Vec<usize> = paths.iter().map(|p| self.grid[*p].len()).collect();
        let total: usize = sizes.iter().product();
        if total == 0 {
            return Err(SweepError::EmptyGrid);
        }
        let mut cells = Vec::with_capacity(total);
        let mut indices = vec![0usize; paths.len()];
        loop {
            let mut value = self.base.clone();
            for (axis, path) in paths.iter().enumerate() {
                let v = &self.grid[*path][indices[axis]];
                let raw = format!("{path}={}", toml_literal(v));
                apply_override(&mut value, &raw)?;
            }
            let config: ExperimentConfig =
                value.try_into().map_err(ConfigError::Parse)?;
            config.validate()?;
            cells.push(config);

            // Odometer increment: last axis fastest.
            let mut axis = paths.len();
            loop {
                if axis == 0 {
                    return Ok(cells);
                }
                axis -= 1;
                indices[axis] += 1;
                if indices[axis] < sizes[axis] {
                    break;
                }
                indices[axis] = 0;
            }
        }
    }
}

fn toml_literal(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => format!("{s:?}"),
        other => other.to_string(),
    }
}

/// Outcome of one (cell, seed) execution.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub cell: usize,
    pub seed: u64,
    pub dir: PathBuf,
    pub config_hash: String,
    pub ok: bool,
    pub error: Option<String>,
}

/// Runs every (cell, seed) pair under `out_root`, `parallelism` at a
/// time (0 = one worker per core). Failures are recorded in the summary
/// and do not stop other cells.
pub fn run_sweep(
    spec: &SweepSpec,
    out_root: &Path,
    parallelism: usize,
) -> Result<Vec<CellResult>, SweepError> {
    let cells = spec.enumerate_cells()?;
    std::fs::create_dir_all(out_root).map_err(|source| SweepError::Io {
        path: out_root.to_path_buf(),
        source,
    })?;

    let mut jobs = Vec::new();
    for (idx, config) in cells.iter().enumerate() {
        for &seed in &config.seeds {
            let dir = runner::run_dir(&out_root.join(format!("cell_{idx:03}")), seed);
            jobs.push((idx, seed, config.clone(), dir));
        }
    }

    let execute = |(idx, seed, config, dir): &(usize, u64, ExperimentConfig, PathBuf)| {
        let outcome: Result<_, RunError> = runner::run(config, *seed, dir);
        CellResult {
            cell: *idx,
            seed: *seed,
            dir: dir.clone(),
            config_hash: config.hash(),
            ok: outcome.is_ok(),
            error: outcome.err().map(|e| e.to_string()),
        }
    };

    let mut results: Vec<CellResult> = if parallelism == 1 {
        jobs.iter().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .expect("thread pool");
        pool.install(|| jobs.par_iter().map(execute).collect())
    };
    results.sort_by_key(|r| (r.cell, r.seed));

    let summary = serde_json::to_string_pretty(&results).expect("summary serializes");
    std::fs::write(out_root.join("sweep_summary.json"), summary + "\n")
        .map_err(SweepError::Summary)?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_48_cells() {
        let spec = SweepSpec::from_toml("").unwrap();
        let cells = spec.enumerate_cells().unwrap();
        assert_eq!(cells.len(), 48);
        // Lexicographic order: beta varies slowest, zeta fastest.
        assert_eq!(cells[0].switch.beta, 0.0);
        assert_eq!(cells[0].switch.min_length_fraction, 0.0);
        assert_eq!(cells[0].switch.zeta, 0.25);
        assert_eq!(cells[1].switch.zeta, 0.5);
        assert_eq!(cells[4].switch.min_length_fraction, 0.25);
        assert_eq!(cells[4].switch.beta, 0.0);
        assert_eq!(cells[47].switch.beta, 0.95);
        assert_eq!(cells[47].switch.min_length_fraction, 0.75);
        assert_eq!(cells[47].switch.zeta, 1.0);
    }

    #[test]
    fn single_value_axes_give_one_cell() {
        let spec = SweepSpec::from_toml(
            "[grid]\n\"switch.beta\" = [0.9]\n\"agent.batch_size\" = [64]\n",
        )
        .unwrap();
        let cells = spec.enumerate_cells().unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].switch.beta, 0.9);
        assert_eq!(cells[0].agent.batch_size, 64);
    }

    #[test]
    fn base_table_feeds_cells() {
        let spec = SweepSpec::from_toml(
            "[base]\ncontroller = \"fbrl\"\nseeds = [3]\n\n[grid]\n\"switch.zeta\" = [0.0, 1.0]\n",
        )
        .unwrap();
        let cells = spec.enumerate_cells().unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells
            .iter()
            .all(|c| c.controller == crate::switching::ControllerKind::Fbrl));
        assert_eq!(cells[0].switch.zeta, 0.0);
        assert_eq!(cells[1].switch.zeta, 1.0);
    }

    #[test]
    fn invalid_grid_values_fail_enumeration() {
        let spec =
            SweepSpec::from_toml("[grid]\n\"switch.zeta\" = [2.5]\n").unwrap();
        assert!(spec.enumerate_cells().is_err());
    }

    #[test]
    fn empty_axis_is_rejected() {
        let err = SweepSpec::from_toml("[grid]\n\"switch.zeta\" = []\n").unwrap_err();
        assert!(matches!(err, SweepError::EmptyGrid));
    }
}
