use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use resetrl_core::config::{env_by_name, OUTPUT_ROOT_VAR};
use resetrl_core::experiment::{run_experiment, run_sweep, write_atomic, SweepAxis};
use resetrl_core::metrics::format_real;
use resetrl_core::oracle::{irreversible_states, value_iteration_env, ExactQ};
use resetrl_core::plot::{render, PlotKind};
use resetrl_core::{load_config, Error, PolicyRole};

const EXIT_RUN: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "resetrl", version, about = "Forward/reset RL experiments with early aborts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config.
    Run { config: PathBuf },
    /// Run a config once per value of one parameter and summarize.
    Sweep {
        config: PathBuf,
        /// q_min, reset_attempts, ensemble_size, strategy or mode.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Exact Q-values and irreversible states of a gridworld.
    Oracle {
        env: String,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Output directory (default: $RESETRL_OUTPUT_ROOT or the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a CSV as SVG plus gnuplot data.
    Plot {
        csv: PathBuf,
        /// curves, heatmap or sweep_bars.
        #[arg(long)]
        kind: String,
        /// Output SVG path (default: next to the CSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn q_csv(q: &ExactQ) -> String {
    let mut out = String::from("state,action,value\n");
    for s in 0..q.states() {
        for (a, v) in q.row(s).iter().enumerate() {
            out.push_str(&format!("{s},{a},{}\n", format_real(*v)));
        }
    }
    out
}

fn oracle(env: &str, gamma: f64, tol: f64, out: Option<PathBuf>) -> anyhow::Result<()> {
    let environment = env_by_name(env)?;
    let forward = value_iteration_env(environment.as_ref(), PolicyRole::Forward, gamma, tol)?;
    let reset = value_iteration_env(environment.as_ref(), PolicyRole::Reset, gamma, tol)?;
    let grid = environment.grid_map().expect("value iteration succeeded");
    let irreversible = irreversible_states(grid);
    let dir = out
        .or_else(|| std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    write_atomic(&dir.join(format!("{env}_q_forward.csv")), q_csv(&forward).as_bytes())?;
    write_atomic(&dir.join(format!("{env}_q_reset.csv")), q_csv(&reset).as_bytes())?;
    let mut flags = String::from("state,irreversible\n");
    for s in grid.valid_states() {
        flags.push_str(&format!("{s},{}\n", u8::from(irreversible.contains(&s))));
    }
    write_atomic(&dir.join(format!("{env}_irreversible.csv")), flags.as_bytes())?;
    println!(
        "{env}: residuals {:.3e} (forward) {:.3e} (reset); irreversible states {:?}; written to {}",
        forward.residual,
        reset.residual,
        irreversible,
        dir.display()
    );
    Ok(())
}

fn plot(csv: &Path, kind: &str, out: Option<PathBuf>) -> anyhow::Result<()> {
    let kind: PlotKind = kind.parse()?;
    let text = std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    let p = render(&text, kind)?;
    if p.empty {
        log::warn!("{} has no data rows; writing empty axes", csv.display());
    }
    let svg = out.unwrap_or_else(|| csv.with_extension("svg"));
    write_atomic(&svg, p.svg.as_bytes())?;
    write_atomic(&svg.with_extension("dat"), p.data.as_bytes())?;
    println!("wrote {}", svg.display());
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let report = run_experiment(&cfg)?;
            for run in &report.runs {
                println!(
                    "seed {}: hard_resets={} early_aborts={} eval_return={}",
                    run.seed,
                    run.metrics.final_hard_resets(),
                    run.metrics.last().map_or(0, |r| r.early_aborts),
                    format_real(run.metrics.final_eval_return())
                );
            }
            println!("wrote {} files to {}", report.files.len(), report.dir.display());
        }
        Command::Sweep { config, axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            let cfg = load_config(&config)?;
            let (summary, path) = run_sweep(&cfg, axis, &values)?;
            print!("{}", summary.to_csv());
            println!("wrote {}", path.display());
        }
        Command::Oracle { env, gamma, tol, out } => oracle(&env, gamma, tol, out)?,
        Command::Plot { csv, kind, out } => plot(&csv, &kind, out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e
                .downcast_ref::<Error>()
                .is_some_and(Error::is_config_error);
            ExitCode::from(if config { EXIT_CONFIG } else { EXIT_RUN })
        }
    }
}
