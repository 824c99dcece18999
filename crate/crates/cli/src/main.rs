mod commands;
mod config;
mod failure;
mod human;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use failure::Failure;

#[derive(Parser)]
#[command(name = "rulelab", version, about = "Rule-induction experiments: exemplar lists, learners, grading and reports")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(short, long, global = true, default_value = "experiment.json")]
    config: PathBuf,
    /// Worker threads for per-rule parallelism (default: all cores).
    #[arg(short, long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Engine {
    Plot,
    Llm,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate one exemplar list per manifest rule.
    Gen,
    /// Run a learner over every list.
    Run {
        #[arg(long, value_enum)]
        engine: Engine,
        /// Override the configured noise parameters (plot engine).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Redo rules that already have outputs.
        #[arg(long)]
        force: bool,
    },
    /// Grade reported rules: likelihood, consistency and match rate.
    Grade {
        /// Lines of `rule_id set_index concept`.
        #[arg(long)]
        elicited: PathBuf,
        /// Series directory of the learner that reported the rules (enables consistency).
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy tables, learning curves and human comparisons.
    Report {
        /// One or more series directories.
        #[arg(long, required = true, num_args = 1..)]
        series: Vec<PathBuf>,
        /// Human response CSV (defaults to the configured one).
        #[arg(long)]
        human: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded train / held-out partition of the manifest rules.
    Split {
        #[arg(long)]
        held_out: usize,
    },
    /// Fit the noise parameters to human proportions on a lattice.
    FitNoise {
        /// Restrict fitting to the training side of this split.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Lattice step (defaults to the configured one).
        #[arg(long)]
        step: Option<f64>,
    },
    /// Check two concepts for equivalence and print a counterexample if any.
    Equiv { a: String, b: String },
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(Failure::config)?;
    }
    if let Cmd::Equiv { a, b } = &cli.cmd {
        let cfg = config::ExperimentConfig::load(&cli.config).ok();
        return commands::equiv(cfg.as_ref(), a, b);
    }
    let cfg = config::ExperimentConfig::load(&cli.config).map_err(Failure::config)?;
    match cli.cmd {
        Cmd::Gen => commands::gen(&cfg),
        Cmd::Run { engine, alpha, beta, force } => match engine {
            Engine::Plot => commands::run_plot(&cfg, alpha, beta, force),
            Engine::Llm => commands::run_llm(&cfg, force),
        },
        Cmd::Grade { elicited, series, out } => commands::grade(&cfg, &elicited, series.as_deref(), out),
        Cmd::Report { series, human, out } => commands::report(&cfg, &series, human, out),
        Cmd::Split { held_out } => commands::split(&cfg, held_out),
        Cmd::FitNoise { split, step } => commands::fit_noise(&cfg, split.as_deref(), step),
        Cmd::Equiv { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.class as u8)
        }
    }
}
