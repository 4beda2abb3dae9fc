use std::path::PathBuf;
use std::process::ExitCode;

use capi_core::exact::{format_value, optimal_value};
use capi_core::zoo::load_game;
use capi_harness::config::{load_config, parse_seeds, ExperimentConfig};
use capi_harness::summary::{find_summaries, write_plot_data};
use capi_harness::{emit_plot_data, run_experiment, HarnessError, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "capi", about = "Run and summarize cooperative-game learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from an INI file, or one algorithm from flags.
    Run {
        #[arg(long, conflicts_with_all = ["game", "algo"])]
        config: Option<PathBuf>,
        #[arg(long, requires_all = ["algo", "episodes", "out"])]
        game: Option<String>,
        #[arg(long)]
        algo: Option<String>,
        /// A count, a range `a..b`, or a comma-separated list.
        #[arg(long, default_value = "32")]
        seeds: String,
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        eval_every: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Algorithm parameter override, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print the optimal expected return of a game.
    Oracle {
        #[arg(long)]
        game: String,
    },
    /// Collect summaries into a long-format CSV.
    PlotData {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            game,
            algo,
            seeds,
            episodes,
            eval_every,
            out,
            workers,
            set,
        } => {
            let configs = match (config, game) {
                (Some(path), _) => load_config(&path)?,
                (None, Some(game)) => {
                    let (algo, episodes, out) =
                        (algo.unwrap_or_default(), episodes.unwrap_or(0), out.unwrap_or_default());
                    let mut cfg = ExperimentConfig::new(&game, &algo, parse_seeds(&seeds)?, episodes, out)?;
                    if let Some(e) = eval_every {
                        cfg.eval_every = e;
                    }
                    if let Some(w) = workers {
                        cfg.workers = w;
                    }
                    for kv in &set {
                        let (k, v) = kv
                            .split_once('=')
                            .ok_or_else(|| HarnessError::Config(format!("--set expects key=value, got {kv:?}")))?;
                        cfg.set(k.trim(), v)?;
                    }
                    vec![cfg]
                }
                (None, None) => return Err(HarnessError::Config("run needs --config or --game".into())),
            };
            let summary = run_experiment(&configs)?;
            println!("{} (optimum {})", summary.game, format_value(summary.oracle));
            for a in &summary.algorithms {
                println!(
                    "{:>8} {:<28} best min {:.4} median {:.4} max {:.4} mean {:.4} solved {:.3}{}",
                    a.algorithm,
                    a.setting,
                    a.min,
                    a.median,
                    a.max,
                    a.mean,
                    a.solve_rate,
                    if a.selected { " *" } else { "" }
                );
            }
            if !summary.deterministic {
                println!("results depend on the wall clock");
            }
        }
        Command::Oracle { game } => {
            let game = load_game(&game)?;
            println!("{}", format_value(optimal_value(&game)?));
        }
        Command::PlotData { input, out } => {
            let rows = emit_plot_data(&find_summaries(&input)?)?;
            write_plot_data(&rows, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
