//! `metaplan`: generate problems, inspect meta-action spaces, train and
//! evaluate policies, and validate parallel plans.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input error,
//! 3 plan validation failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{EnvFlags, TrainFlags};

#[derive(Debug, Parser)]
#[command(name = "metaplan", version, about = "Planning with meta-operators")]
struct Cli {
    /// TOML file with [env] and [train] tables; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded problem set
    Gen(GenArgs),
    /// List the meta-actions applicable in the initial state
    Actions(ActionsArgs),
    /// Train a policy on a problem directory
    Train(TrainArgs),
    /// Evaluate a checkpoint on a problem directory
    Eval(EvalArgs),
    /// Check a plan file against a problem
    Validate(ValidateArgs),
    /// Print the parallelism rate of a plan file
    Rate(RateArgs),
    /// Find a shortest plan by breadth-first search
    Solve(SolveArgs),
    /// Print the grounded task as JSON
    Ground(TaskArgs),
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    #[arg(long)]
    pub domain: PathBuf,
    #[arg(long)]
    pub problem: PathBuf,
    /// Drop operators unreachable under the delete relaxation
    #[arg(long)]
    pub prune: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub domain: String,
    /// train, test or custom
    #[arg(long, default_value = "train")]
    pub preset: String,
    /// Count range override, e.g. blocks=3..4 (repeatable)
    #[arg(long = "range", value_name = "KEY=LO..HI")]
    pub ranges: Vec<String>,
    /// Number of instances sampled from the ranges
    #[arg(long, default_value_t = 10, conflicts_with = "per_config")]
    pub count: usize,
    /// Instances per combination of counts instead of sampling
    #[arg(long)]
    pub per_config: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "METAPLAN_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ActionsArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[arg(long, short = 'L', default_value_t = 2)]
    pub degree: usize,
}

#[derive(Debug, Args)]
pub struct ProblemSet {
    /// Directory of problem files
    #[arg(long)]
    pub problems: PathBuf,
    /// Domain file; defaults to <problems>/domain.pddl
    #[arg(long)]
    pub domain: Option<PathBuf>,
    #[arg(long)]
    pub prune: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub set: ProblemSet,
    #[command(flatten)]
    pub env: EnvFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Train once per listed meta reward, e.g. 0,0.01,0.001
    #[arg(long, value_delimiter = ',')]
    pub sweep_meta_reward: Option<Vec<f64>>,
    #[arg(long, env = "METAPLAN_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub set: ProblemSet,
    #[command(flatten)]
    pub env: EnvFlags,
    /// Pick the most probable action (default)
    #[arg(long, conflicts_with = "sample")]
    pub greedy: bool,
    /// Sample actions from the policy
    #[arg(long)]
    pub sample: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; printed to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, short = 'L', default_value_t = 2)]
    pub degree: usize,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long)]
    pub plan: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[arg(long, short = 'L', default_value_t = 1)]
    pub degree: usize,
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    #[arg(long, default_value_t = metaplan::evalkit::DEFAULT_STATE_CAP)]
    pub state_cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = config::RunConfig::load(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Gen(a) => commands::gen(a, &cfg),
        Command::Actions(a) => commands::actions(a),
        Command::Train(a) => commands::train(a, &cfg),
        Command::Eval(a) => commands::eval(a, &cfg),
        Command::Validate(a) => commands::validate(a),
        Command::Rate(a) => commands::rate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Ground(a) => commands::ground(a),
    });
    if let Err(e) = result {
        if !e.message.is_empty() {
            eprintln!("error: {e}");
        }
        std::process::exit(e.code);
    }
}
