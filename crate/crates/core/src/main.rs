use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use epinet::cli::{self, Overrides, RunConfig, SEED_ENV};
use epinet::netbuild::SimilarityMeasure;

#[derive(Parser)]
#[command(name = "epinet", version, about = "Epidemic activity correlation networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full run: network, communities, medians, trajectory
    Pipeline(Flags),
    /// Robustness grid and aligned membership matrix
    Grid(Flags),
    /// Network export only
    Network(Flags),
    /// Selected cases and per-stage transform trace
    Transform(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    measure: Option<SimilarityMeasure>,
    #[arg(long = "min-cases")]
    min_cases: Option<i64>,
    #[arg(long)]
    start: Option<NaiveDate>,
    #[arg(long)]
    end: Option<NaiveDate>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Overrides {
            input: f.input,
            config: f.config,
            alpha: f.alpha,
            rho: f.rho,
            measure: f.measure,
            min_cases: f.min_cases,
            start: f.start,
            end: f.end,
            seed: f.seed,
            jobs: f.jobs,
            out: f.out,
        }
    }
}

type Runner = fn(&RunConfig) -> epinet::Result<Vec<PathBuf>>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (flags, run): (Flags, Runner) = match cli.command {
        Command::Pipeline(f) => (f, cli::cmd_pipeline),
        Command::Grid(f) => (f, cli::cmd_grid),
        Command::Network(f) => (f, cli::cmd_network),
        Command::Transform(f) => (f, cli::cmd_transform),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = RunConfig::resolve(&flags.into(), env_seed.as_deref()).and_then(|cfg| run(&cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", cli::error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
