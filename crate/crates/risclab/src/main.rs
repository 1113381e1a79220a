//! Command-line entry point.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for runtime
//! failures.

use anyhow::Context;
use clap::{Parser, Subcommand};
use risclab::harness::{self, ExperimentConfig, ReportOptions, SweepSpec};
use risclab::metrics;
use risclab::{env::GridSpec, svg};
use std::path::PathBuf;
use std::process::ExitCode;

const OUT_ENV_VAR: &str = "RISCLAB_OUT";

#[derive(Parser)]
#[command(
    name = "risclab",
    version,
    about = "Reset-free RL lab: switching controllers, oracles, and reproducible gridworld experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config for its configured seeds.
    Run {
        /// Experiment config (TOML). Omit to use the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run only this seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Dotted-path overrides, e.g. --set switch.zeta=0.25.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Output root (default: $RISCLAB_OUT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a sweep spec: a base config crossed with a parameter grid.
    Sweep {
        /// Sweep spec (TOML with [base] and [grid] tables). Omit for the
        /// default modulation grid over the default config.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate finished runs into a report bundle.
    Report {
        /// Run directories (each holding a manifest.json).
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bootstrap replications.
        #[arg(long, default_value_t = 2_000)]
        reps: u32,
        /// Confidence level.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Report RNG seed (bootstrap resampling).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Render heatmaps at these snapshot steps (repeatable).
        #[arg(long = "heatmap-step")]
        heatmap_steps: Vec<u64>,
        /// Heatmap window length in forward-mode steps.
        #[arg(long, default_value_t = metrics::DEFAULT_HEATMAP_WINDOW)]
        heatmap_window: u64,
    },
    /// Print a grid layout in the plain-text map format.
    DumpMap {
        /// Builtin id: "four_rooms" or "chain:<n>".
        #[arg(long, default_value = "four_rooms")]
        builtin: String,
        /// Read this map file instead of a builtin.
        #[arg(long, conflicts_with = "builtin")]
        map_path: Option<PathBuf>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print exact oracle values (BFS distance, V*, competency fixed
    /// point) as CSV.
    DumpOracle {
        #[arg(long, default_value = "four_rooms")]
        builtin: String,
        #[arg(long, conflicts_with = "builtin")]
        map_path: Option<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
        /// Success-critic discount (defaults to --gamma).
        #[arg(long)]
        gamma_sc: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render visitation and value heatmaps from one run directory.
    Heatmap {
        #[arg(long)]
        run_dir: PathBuf,
        /// Snapshot step to render (must be in the run's snapshot_steps).
        #[arg(long)]
        start_step: u64,
        #[arg(long, default_value_t = metrics::DEFAULT_HEATMAP_WINDOW)]
        window: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Errors that should exit with code 2 (bad configuration or usage).
fn is_config_error(err: &anyhow::Error) -> bool {
    if let Some(e) = err.downcast_ref::<harness::RunError>() {
        return matches!(e, harness::RunError::Config(_));
    }
    if let Some(e) = err.downcast_ref::<harness::SweepError>() {
        return matches!(
            e,
            harness::SweepError::Config(_) | harness::SweepError::EmptyGrid
        );
    }
    if let Some(e) = err.downcast_ref::<harness::ReportError>() {
        return matches!(
            e,
            harness::ReportError::Incompatible(_) | harness::ReportError::NoRuns
        );
    }
    err.downcast_ref::<harness::ConfigError>().is_some()
        || err.downcast_ref::<risclab::env::EnvError>().is_some()
}

fn out_root(flag: Option<PathBuf>, default: &str) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(default))
}

fn load_spec(builtin: &str, map_path: &Option<PathBuf>) -> anyhow::Result<GridSpec> {
    let choice = match map_path {
        Some(path) => harness::config::EnvChoice {
            builtin: None,
            map_path: Some(path.clone()),
        },
        None => harness::config::EnvChoice {
            builtin: Some(builtin.to_string()),
            map_path: None,
        },
    };
    Ok(choice.build()?)
}

fn emit(out: Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            sets,
            out,
        } => {
            let config = match config {
                Some(path) => ExperimentConfig::from_path(&path, &sets)?,
                None => {
                    ExperimentConfig::from_toml(&ExperimentConfig::default().to_canonical_toml(), &sets)?
                }
            };
            let root = out_root(out, "runs");
            let seeds = match seed {
                Some(s) => vec![s],
                None => config.seeds.clone(),
            };
            let exp_root = root.join(format!("{}-{}", config.label(), &config.hash()[..8]));
            for s in seeds {
                let dir = harness::run_dir(&exp_root, s);
                let summary = harness::run(&config, s, &dir)?;
                println!("run complete: seed {s} -> {}", summary.dir.display());
            }
            Ok(())
        }
        Command::Sweep {
            spec,
            parallelism,
            out,
        } => {
            let spec = match spec {
                Some(path) => SweepSpec::from_path(&path)?,
                None => SweepSpec::from_toml("")?,
            };
            let root = out_root(out, "sweeps");
            let results = harness::run_sweep(&spec, &root, parallelism)?;
            let failed = results.iter().filter(|r| !r.ok).count();
            println!(
                "sweep complete: {} runs, {} failed, summary at {}",
                results.len(),
                failed,
                root.join("sweep_summary.json").display()
            );
            if failed > 0 {
                anyhow::bail!("{failed} sweep cells failed; see sweep_summary.json");
            }
            Ok(())
        }
        Command::Report {
            run_dirs,
            out,
            reps,
            level,
            seed,
            heatmap_steps,
            heatmap_window,
        } => {
            let out = out_root(out, "report");
            let opts = ReportOptions {
                reps,
                level,
                seed,
                heatmap_steps,
                heatmap_window,
            };
            let bundle = harness::report(&run_dirs, &out, &opts)?;
            for group in &bundle.groups {
                println!(
                    "{}: final {} [{}, {}] | auc {} [{}, {}]",
                    group.label,
                    format_stat(group.final_success.iqm.point),
                    format_stat(group.final_success.iqm.ci_low),
                    format_stat(group.final_success.iqm.ci_high),
                    format_stat(group.auc.iqm.point),
                    format_stat(group.auc.iqm.ci_low),
                    format_stat(group.auc.iqm.ci_high),
                );
            }
            println!("report written to {}", out.display());
            Ok(())
        }
        Command::DumpMap {
            builtin,
            map_path,
            out,
        } => {
            let spec = load_spec(&builtin, &map_path)?;
            emit(out, &spec.dump_map())
        }
        Command::DumpOracle {
            builtin,
            map_path,
            gamma,
            gamma_sc,
            out,
        } => {
            let spec = load_spec(&builtin, &map_path)?;
            let csv = harness::oracle_csv(&spec, gamma, gamma_sc.unwrap_or(gamma))?;
            emit(out, &csv)
        }
        Command::Heatmap {
            run_dir,
            start_step,
            window,
            out,
        } => {
            let config = harness::runner::read_run_config(&run_dir)?;
            let spec = config.env.build()?;
            let snapshot = run_dir.join(format!("qtable_at_{start_step:06}.csv"));
            if !snapshot.exists() {
                anyhow::bail!(
                    "no snapshot for step {start_step} in {} (configure snapshot_steps)",
                    run_dir.display()
                );
            }
            let q = harness::runner::read_qtable_csv(&snapshot, &spec)?;
            let visits = harness::runner::read_positions_csv(&run_dir.join("positions.csv"))?;
            let window_data = metrics::heatmap(&visits, &q, &spec, start_step, window)?;

            let out = out_root(out, ".");
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let mut visit_values = Vec::new();
            let mut q_values = Vec::new();
            for r in 0..spec.height() {
                for c in 0..spec.width() {
                    let cell = risclab::env::Cell::new(r, c);
                    if spec.is_wall(cell) {
                        visit_values.push(None);
                        q_values.push(None);
                    } else {
                        visit_values.push(Some(window_data.visits(cell) as f64));
                        q_values
                            .push(Some(window_data.max_q(cell, risclab::env::GoalKind::Forward)));
                    }
                }
            }
            let visits_path = out.join(format!("heatmap_visits_{start_step:06}.svg"));
            let q_path = out.join(format!("heatmap_q_{start_step:06}.svg"));
            std::fs::write(
                &visits_path,
                svg::grid_heatmap(
                    &format!("forward visits after step {start_step}"),
                    spec.width(),
                    spec.height(),
                    &visit_values,
                ),
            )?;
            std::fs::write(
                &q_path,
                svg::grid_heatmap(
                    &format!("greedy Q (forward) at step {start_step}"),
                    spec.width(),
                    spec.height(),
                    &q_values,
                ),
            )?;
            println!("wrote {} and {}", visits_path.display(), q_path.display());
            Ok(())
        }
    }
}

fn format_stat(v: f64) -> String {
    format!("{v:.4}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_config_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
