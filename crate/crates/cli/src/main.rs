//! `confusim`: build ASR error models from decoder output, sample and inject
//! errors, and cluster knowledge-base titles.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "confusim", version, about = "ASR error simulation from confusion networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a rewrite model from N-best lists or confusion networks
    Build(BuildArgs),
    /// Print sampled misrecognitions of one word
    Simulate(SimulateArgs),
    /// Corrupt user turns of a dialogue corpus
    Corrupt(CorruptArgs),
    /// Group knowledge-base titles into clusters
    #[command(subcommand)]
    Cluster(ClusterCommand),
    /// Summarize a model file
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Auto,
    Nbest,
    Sausage,
}

#[derive(Args)]
pub struct BuildArgs {
    /// Input files, or directories whose files are all read
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = confusim::edit_model::DEFAULT_POSITION_CAP)]
    pub position_cap: usize,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(short, long)]
    pub word: String,
    /// Number of variants
    #[arg(short, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Print the edit trace next to each variant
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Args)]
pub struct CorruptArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Dialogues, one JSON object per line
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = confusim::simulator::DEFAULT_MAX_CORRUPTED_WORDS)]
    pub max_words: usize,
    /// Corrupt only the last user turn of each dialogue (default)
    #[arg(long, conflicts_with = "all_user_turns")]
    pub last_turn_only: bool,
    /// Corrupt every user turn
    #[arg(long)]
    pub all_user_turns: bool,
    /// Also corrupt system turns
    #[arg(long)]
    pub include_system_turns: bool,
    /// Worker threads; output does not depend on this
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Subcommand)]
pub enum ClusterCommand {
    /// Group titles by their normalized key
    Init(ClusterInitArgs),
    /// Write title-body pairs for training a pair judge
    Pairs(ClusterPairsArgs),
    /// Merge clusters until a pairwise judge stops agreeing
    Merge(ClusterMergeArgs),
}

#[derive(Args)]
pub struct KbArgs {
    #[arg(long)]
    pub kb: PathBuf,
    /// One stopword per line, replacing the built-in English list
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Args)]
pub struct ClusterInitArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct ClusterPairsArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Clusters file; the initial clustering is used when absent
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Args)]
pub struct ClusterMergeArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Clusters file; the initial clustering is used when absent
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    pub majority: f64,
    /// `jaccard`, or `constant:<score>`
    #[arg(long, default_value = "jaccard")]
    pub oracle: String,
    /// Forced cluster assignments applied after merging
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    /// Do not prioritize cluster pairs that share a body
    #[arg(long)]
    pub no_body_proposals: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args)]
pub struct StatsArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Rewrites listed per context
    #[arg(long, default_value_t = 3)]
    pub top: usize,
}

/// Bad invocation: exit 1. Anything wrong with the data: exit 2.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Build(a) => commands::build(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Corrupt(a) => commands::corrupt(&a),
        Command::Cluster(ClusterCommand::Init(a)) => commands::cluster_init(&a),
        Command::Cluster(ClusterCommand::Pairs(a)) => commands::cluster_pairs(&a),
        Command::Cluster(ClusterCommand::Merge(a)) => commands::cluster_merge(&a),
        Command::Stats(a) => commands::stats(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
