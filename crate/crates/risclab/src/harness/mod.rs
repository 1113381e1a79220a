//! Reproducibility shell: configuration, run/sweep orchestration, and
//! report generation.

pub mod config;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{ConfigError, ExperimentConfig};
pub use report::{report, ReportBundle, ReportError, ReportOptions};
pub use runner::{run, run_dir, RunError, RunSummary};
pub use sweep::{run_sweep, SweepError, SweepSpec};

use crate::env::{GoalKind, GridSpec};
use crate::oracle;

/// Renders the oracle CSV for a grid: BFS distance, optimal value, and
/// the competency fixed point for every free (cell, goal) pair.
pub fn oracle_csv(spec: &GridSpec, gamma: f64, gamma_sc: f64) -> Result<String, oracle::OracleError> {
    let mut out = String::from("cell_x,cell_y,goal_kind,dist,v_star,f_star\n");
    for kind in [GoalKind::Forward, GoalKind::Reset] {
        let goal = spec.goal(kind);
        let dist = oracle::shortest_paths(spec, goal);
        let values = oracle::value_iteration(spec, goal, gamma, 1e-10)?;
        for cell in spec.free_cells() {
            let (d, f_star) = match dist.dist(cell) {
                Some(0) => ("0".to_string(), String::new()),
                Some(d) => (
                    d.to_string(),
                    format!("{:.10}", oracle::optimal_competency(i64::from(d), gamma_sc)?),
                ),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{:.10},{}\n",
                cell.col,
                cell.row,
                kind.as_str(),
                d,
                values.value(cell),
                f_star
            ));
        }
    }
    Ok(out)
}
