mod config;
mod fail;
mod studies;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qlab::qlearn::QAlgo;

use fail::{CliError, Kind};
use studies::{out_dir, prepare, CliResult};

#[derive(Parser)]
#[command(name = "qlab", version, about = "Studies of online tabular Q-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the seed list by this many consecutive seeds.
    #[arg(long)]
    seeds: Option<u64>,
    /// Abort when a hyperparameter condition fails.
    #[arg(long)]
    strict_conditions: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an MDP file by value iteration.
    Solve {
        mdp: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Boltzmann Q-learning runs.
    RunBoltzmann(Common),
    /// Smoothed ε-greedy Q-learning runs.
    RunSeg(Common),
    /// Error envelope across seeds and its fitted decay.
    Concentration(Common),
    /// Cumulative regret and its fitted growth.
    Regret(Common),
    /// Pathwise noise decomposition over a window.
    Decomposition(Common),
    /// Softmax sensitivity grid for two actions.
    Heatmap {
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
        x_min: f64,
        #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
        x_max: f64,
        #[arg(long, default_value_t = 0.1)]
        lambda_min: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda_max: f64,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hyperparameter conditions and start-index requirements.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_root() -> PathBuf {
    std::env::var_os("QLAB_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("qlab-out"))
}

fn with_prepared(
    c: Common,
    name: &str,
    root: &Path,
    f: impl FnOnce(&studies::Prepared, PathBuf) -> CliResult<bool>,
) -> CliResult<bool> {
    let (p, base) = prepare(&c.config, c.seeds, c.strict_conditions)?;
    let dir = out_dir(c.out, Some(&p.cfg), &base, root, name);
    f(&p, dir)
}

fn dispatch(cmd: Command) -> CliResult<bool> {
    let root = out_root();
    match cmd {
        Command::Solve { mdp, out } => studies::cmd_solve(&mdp, out.unwrap_or_else(|| root.join("solve"))),
        Command::RunBoltzmann(c) => {
            with_prepared(c, "run-boltzmann", &root, |p, d| studies::cmd_run(p, QAlgo::Boltzmann, d))
        }
        Command::RunSeg(c) => with_prepared(c, "run-seg", &root, |p, d| studies::cmd_run(p, QAlgo::Seg, d)),
        Command::Concentration(c) => with_prepared(c, "concentration", &root, studies::cmd_concentration),
        Command::Regret(c) => with_prepared(c, "regret", &root, studies::cmd_regret),
        Command::Decomposition(c) => with_prepared(c, "decomposition", &root, studies::cmd_decomposition),
        Command::Heatmap { x_min, x_max, lambda_min, lambda_max, resolution, out } => studies::cmd_heatmap(
            (x_min, x_max),
            (lambda_min, lambda_max),
            resolution,
            out.unwrap_or_else(|| root.join("heatmap")),
        ),
        Command::Audit { config, out } => studies::cmd_audit(&config, out, &root),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return report(CliError::new(Kind::Usage, e.kind().to_string()));
        }
    };
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(Kind::Verdict.code() as u8),
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.kind.code() as u8)
}
