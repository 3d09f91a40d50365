use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spdelab::config::{Experiment, ExperimentConfig};
use spdelab::experiments::{exit_status, run_to_dir};
use spdelab::report::emit_plotdata;
use spdelab::Error;

#[derive(Parser)]
#[command(name = "spdelab", version, about = "Spectral-Galerkin SPDE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory (default: $SPDELAB_OUT, then output.dir, then ./results).
    #[arg(long, env = "SPDELAB_OUT")]
    out: Option<PathBuf>,
    /// Override a config value, e.g. --set bound.delta=0.3.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Pathwise stochastic-convolution bounds.
    ConvBound(RunArgs),
    /// Spectral series values and divergence flags.
    ZSeries(RunArgs),
    /// Galerkin trajectories.
    Simulate(RunArgs),
    /// Moment finiteness sweep.
    Moments(RunArgs),
    /// Lyapunov calibration and the differential inequality.
    Lyapunov(RunArgs),
    /// One-sided and cubic inequalities.
    Onesided(RunArgs),
    /// Kolmogorov generator invariance.
    Invariance(RunArgs),
    /// Every experiment in sequence.
    All(RunArgs),
    /// Convert a results CSV into tidy plotting rows.
    Plotdata {
        /// Results CSV written by an experiment.
        input: PathBuf,
        /// Destination CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(exp: Experiment, args: RunArgs) -> i32 {
    let mut overrides = args.set.clone();
    overrides.push(format!("experiment=\"{}\"", exp.tag()));
    if let Some(s) = args.seed {
        overrides.push(format!("run.seed={s}"));
    }
    if let Some(r) = args.replicas {
        overrides.push(format!("run.replicas={r}"));
    }
    let cfg = match ExperimentConfig::load(args.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let dir = args.out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let result = run_to_dir(&cfg, &dir);
    match &result {
        Ok((summary, files)) => {
            for a in &summary.assertions {
                println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            println!("results: {}", files.results.display());
            println!("summary: {}", files.summary.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_status(&result.map(|r| r.0))
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::ConvBound(a) => run(Experiment::ConvBound, a),
        Command::ZSeries(a) => run(Experiment::ZSeries, a),
        Command::Simulate(a) => run(Experiment::Simulate, a),
        Command::Moments(a) => run(Experiment::Moments, a),
        Command::Lyapunov(a) => run(Experiment::Lyapunov, a),
        Command::Onesided(a) => run(Experiment::Onesided, a),
        Command::Invariance(a) => run(Experiment::Invariance, a),
        Command::All(a) => run(Experiment::All, a),
        Command::Plotdata { input, out } => match emit_plotdata(&input, &out) {
            Ok(n) => {
                println!("{n} rows written to {}", out.display());
                0
            }
            Err(e @ Error::Config(_)) => {
                eprintln!("error: {e}");
                2
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
    };
    ExitCode::from(code as u8)
}
