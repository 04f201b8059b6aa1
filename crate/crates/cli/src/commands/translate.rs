//! filter-parallel, prompts and jobs.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use mixforge::ingest::{Document, Tokenizer};
use mixforge::mixture::{
    build_translation_jobs, filter_parallel, read_pairs, render_translation_prompt, synthetic_eligible, ConstantScorer, PrecomputedScorer,
    PromptKind, QeScorer, DEFAULT_TAU,
};
use mixforge::registry::{display_name, LanguageCode, DEFAULT_SELECTION_THRESHOLD};
use serde_json::json;

use super::{document_stream, load_registry, parse_tokenizer, path_strings, Ctx};
use crate::output::usage;

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Parallel pairs as JSON lines.
    #[arg(long)]
    pub input: PathBuf,
    /// Retention threshold; pairs scoring at least this are kept.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Score every pair with this value instead of its `qe_score`.
    #[arg(long)]
    pub constant_score: Option<f64>,
    /// Tokenizer for the token tallies: `byte` or `whitespace:<vocab>`.
    #[arg(long, default_value = "byte")]
    pub tokenizer: String,
}

pub fn filter(ctx: &mut Ctx, args: &FilterArgs) -> Result<()> {
    let tau = args.tau.or(ctx.config.as_ref().map(|c| c.tau)).unwrap_or(DEFAULT_TAU);
    let spec = parse_tokenizer(&args.tokenizer)?;
    let tokenizer = Tokenizer::new(spec.clone())?;
    let pairs = read_pairs(&args.input)?;
    let constant = args.constant_score.map(ConstantScorer);
    let scorer: &dyn QeScorer = match &constant {
        Some(c) => c,
        None => &PrecomputedScorer,
    };
    let (retained, stats) = filter_parallel(&pairs, scorer, tau, &tokenizer, ctx.workers())?;
    println!(
        "retained {}/{} pairs, {}/{} tokens at tau {tau}",
        stats.retained_pairs, stats.input_pairs, stats.retained_tokens, stats.input_tokens
    );
    let mut lines = String::new();
    for pair in &retained {
        lines.push_str(&serde_json::to_string(pair)?);
        lines.push('\n');
    }
    let effective = json!({
        "input": args.input.display().to_string(),
        "tau": tau,
        "constant_score": args.constant_score,
        "tokenizer": spec,
    });
    let mut body = serde_json::to_string_pretty(&json!({ "stats": stats, "effective_config": effective }))?;
    body.push('\n');
    ctx.out.file("retained.jsonl", &lines)?;
    ctx.out.file("filter_stats.json", &body)?;
    ctx.out.run_record("filter-parallel", effective)
}

fn parse_kind(text: &str) -> Result<PromptKind> {
    text.parse().map_err(|_| usage(format!("unknown prompt kind {text:?}; use general or math")))
}

/// Accepts a language name, or a code which is mapped to its display name.
fn language_name(text: &str) -> String {
    match LanguageCode::normalize(text) {
        Ok((code, _)) if text.contains('_') => display_name(code.as_str()),
        _ => text.to_owned(),
    }
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    /// `general` or `math`.
    #[arg(long, default_value = "general")]
    pub kind: String,
    /// Source language name or code.
    #[arg(long, default_value = "English")]
    pub source: String,
    /// Target language name or code.
    #[arg(long)]
    pub target: String,
}

pub fn prompts(ctx: &mut Ctx, args: &PromptArgs) -> Result<()> {
    let kind = parse_kind(&args.kind)?;
    let (source, target) = (language_name(&args.source), language_name(&args.target));
    let prompt = render_translation_prompt(kind, &source, &target)?;
    print!("{prompt}");
    ctx.out.file("prompt.txt", &prompt)?;
    ctx.out.run_record("prompts", json!({ "kind": kind, "source": source, "target": target }))
}

#[derive(Debug, Args)]
pub struct JobArgs {
    /// JSON-lines documents or directories containing them.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Comma-separated target codes, or `all` for every eligible language.
    #[arg(long, default_value = "all")]
    pub targets: String,
    /// `general` or `math`.
    #[arg(long, default_value = "general")]
    pub kind: String,
    /// Registry CSV; defaults to the bundled reference registry.
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

pub fn jobs(ctx: &mut Ctx, args: &JobArgs) -> Result<()> {
    let kind = parse_kind(&args.kind)?;
    let registry = load_registry(args.registry.as_deref(), DEFAULT_SELECTION_THRESHOLD)?;
    let eligible = synthetic_eligible(&registry);
    let targets = if args.targets == "all" {
        eligible.clone()
    } else {
        args.targets.split(',').map(|t| LanguageCode::normalize(t.trim()).map(|(c, _)| c)).collect::<Result<Vec<_>, _>>()?
    };
    let docs = document_stream(&args.inputs)?.collect::<Result<Vec<Document>, _>>()?;
    let jobs = build_translation_jobs(&docs, &targets, kind, &eligible, ctx.workers())?;
    let mut lines = String::new();
    for job in &jobs {
        let _ = writeln!(lines, "{}", job.to_json_line());
    }
    if ctx.out.is_enabled() {
        println!("{} jobs for {} documents x {} targets", jobs.len(), docs.len(), jobs.len() / docs.len().max(1));
    } else {
        print!("{lines}");
    }
    ctx.out.file("jobs.jsonl", &lines)?;
    let target_codes: Vec<&str> = targets.iter().map(LanguageCode::as_str).collect();
    ctx.out.run_record(
        "jobs",
        json!({
            "inputs": path_strings(&args.inputs),
            "kind": kind,
            "targets": target_codes,
            "registry": args.registry.as_ref().map(|p| p.display().to_string()),
        }),
    )
}
