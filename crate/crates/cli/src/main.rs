//! `asmr`: fit, diagnose and revise choice models from the command line.
//!
//! Exit status is 0 on success, 1 when the inputs are unusable (bad flags,
//! config, model text or data files) and 2 when a run fails after starting.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use asmr_core::engine::ModelClass;

#[derive(Debug, Parser)]
#[command(
    name = "asmr",
    version,
    about = "Regret-guided revision of multi-attribute choice models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to every subject and print per-subject AIC.
    Fit(FitArgs),
    /// Print the trials where the reference beats a fitted model.
    Regret(RegretArgs),
    /// Run one simulation of the revision loop and write its outputs.
    Run(RunArgs),
    /// Run the full grid of simulations over all starting classes.
    Simulate(SimulateArgs),
    /// Generate synthetic trials and their reference cache.
    Synth(SynthArgs),
    /// Rebuild the tables from an existing run log.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Trial file (CSV, or JSON by extension).
    #[arg(long)]
    trials: PathBuf,
    /// A model file, or one of wadd, ttb, eqw, adaptive.
    #[arg(long)]
    model: String,
    /// Seed for the optimizer start points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct RegretArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Reference cache aligned with the trials.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = asmr_core::regret::DEFAULT_THRESHOLD)]
    threshold: f64,
}

/// Settings shared by `run` and `simulate`; each overrides the config file.
#[derive(Debug, Args)]
struct LoopArgs {
    /// TOML file with run settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Install policy for revisions: always_accept or keep_best.
    #[arg(long)]
    acceptance_policy: Option<String>,
    /// Log full regret sets, not only their sizes.
    #[arg(long)]
    log_regret_points: bool,
    /// Revision source: llm or scripted.
    #[arg(long)]
    reviser: Option<String>,
    /// Chat-completion endpoint base URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model_name: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    top_p: Option<f64>,
    /// Extra attempts after a failed or unusable reply.
    #[arg(long)]
    max_retries: Option<usize>,
    #[arg(long)]
    timeout_secs: Option<f64>,
    #[arg(long)]
    max_points_in_prompt: Option<usize>,
    /// Directory of `.msl` files replayed by the scripted reviser.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    settings: LoopArgs,
    /// Starting class; also selects the simulation seed.
    #[arg(long, default_value = "eqw")]
    class: ModelClass,
    #[arg(long, default_value_t = 0)]
    simulation: usize,
    /// Start from this model (file or builtin name) instead of the class baseline.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    settings: LoopArgs,
    /// Simulations per starting class.
    #[arg(long)]
    simulations: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Directory receiving trials.csv and reference.csv.
    #[arg(long)]
    out: PathBuf,
    /// Generating model (file or builtin name).
    #[arg(long, default_value = "adaptive")]
    model: String,
    /// Comma-separated true parameter values.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "1.5,3.0"
    )]
    params: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    subjects: usize,
    #[arg(long, default_value_t = 96)]
    trials_per_subject: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep trials whose two options are identical.
    #[arg(long)]
    allow_identical: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// A `run_log.jsonl` written by `run` or `simulate`.
    #[arg(long)]
    log: PathBuf,
    /// Write the tables here; without it the summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code == 1 {
                eprintln!("\n{}", Cli::command().render_help());
            }
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a.model),
        Command::Regret(a) => commands::regret(&a),
        Command::Run(a) => commands::run(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
