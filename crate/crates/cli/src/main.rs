//! `mixforge`: corpus statistics, sampling plans, mixture manifests,
//! packing, run planning and evaluation arithmetic from the command line.
//!
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{data, eval, pack, translate};
use crate::output::UsageError;

#[derive(Debug, Parser)]
#[command(name = "mixforge", version, about = "Multilingual continued-pretraining data tooling")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Seed for every randomized step. Falls back to FORGE_SEED, then to the
    /// config file, then to 0.
    #[arg(long, global = true, env = "FORGE_SEED")]
    pub seed: Option<u64>,
    /// Recipe configuration (TOML or JSON). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Without it, results go to stdout only.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Log at debug level.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-language, per-source document and token counts.
    Stats(data::StatsArgs),
    /// Split languages by the selection threshold.
    Select(data::SelectArgs),
    /// UniMax allocation, optionally checked against reference values.
    Plan(data::PlanArgs),
    /// Compile a mixture recipe into a stream manifest.
    Compile(data::CompileArgs),
    /// Keep parallel pairs whose quality score reaches the threshold.
    FilterParallel(translate::FilterArgs),
    /// Split synthetic-data quotas across languages and domains.
    SynthQuota(data::SynthQuotaArgs),
    /// Render a translation prompt.
    Prompts(translate::PromptArgs),
    /// Build translation jobs for documents and target languages.
    Jobs(translate::JobArgs),
    /// Tokenize and pack documents into fixed-length sequence shards.
    Pack(pack::PackArgs),
    /// Re-check a shard directory against its manifest.
    Verify(pack::VerifyArgs),
    /// Steps, learning-rate schedule, FLOPs and MFU for a run.
    PlanRun(eval::PlanRunArgs),
    /// Translation metrics.
    #[command(subcommand)]
    Score(eval::ScoreCommand),
    /// Language-group averages over a score table.
    Aggregate(eval::AggregateArgs),
    /// Recompute result tables from per-task values.
    #[command(subcommand)]
    Report(eval::ReportCommand),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.global.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", render_chain(&err));
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// The error and its causes, skipping causes already spelled out by the
/// message above them.
fn render_chain(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}
