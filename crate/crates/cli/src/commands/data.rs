//! stats, select, plan, compile and synth-quota.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use mixforge::fixtures::{parse_code_value_csv, synthetic_domains};
use mixforge::ingest::{accumulate_stats_stream, CorpusStats, Tokenizer};
use mixforge::mixture::{
    allocate_synth_quota, compile_recipe_with, reference_recipes, parse_recipe_table, quota_languages, Recipe, DEFAULT_CHUNK_TOKENS,
};
use mixforge::registry::{LanguageCode, DEFAULT_SELECTION_THRESHOLD};
use mixforge::sampling::{
    parse_doc_index, schedule_documents, select_from_registry, select_from_stats, unimax_allocate, SamplerConfig, SamplingPlan, Selection,
    DEFAULT_EPOCH_CAP,
};
use serde_json::json;

use super::{document_stream, load_registry, parse_tokenizer, path_strings, read_text, Ctx};
use crate::output::usage;

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// JSON-lines files or directories containing them.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// `byte` or `whitespace:<vocab>`.
    #[arg(long, default_value = "byte")]
    pub tokenizer: String,
    /// Documents tokenized per parallel batch.
    #[arg(long, default_value_t = 4096)]
    pub batch: usize,
}

pub fn stats(ctx: &mut Ctx, args: &StatsArgs) -> Result<()> {
    let spec = parse_tokenizer(&args.tokenizer)?;
    let tokenizer = Tokenizer::new(spec.clone())?;
    let stats = accumulate_stats_stream(document_stream(&args.inputs)?, &tokenizer, ctx.workers(), args.batch)?;
    let mut text = format!("{:<12} {:>12} {:>16}\n", "language", "documents", "tokens");
    for (lang, counts) in stats.totals_by_lang() {
        let _ = writeln!(text, "{:<12} {:>12} {:>16}", lang.as_str(), counts.documents, counts.tokens);
    }
    let total = stats.total();
    let _ = writeln!(text, "{:<12} {:>12} {:>16}", "total", total.documents, total.tokens);
    print!("{text}");
    ctx.out.file("stats.csv", &stats.to_csv())?;
    ctx.out.run_record("stats", json!({ "inputs": path_strings(&args.inputs), "tokenizer": spec, "batch": args.batch }))
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Registry CSV; defaults to the bundled reference registry.
    #[arg(long, conflicts_with = "stats")]
    pub registry: Option<PathBuf>,
    /// Corpus statistics CSV written by `stats`, used instead of a registry.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Minimum raw tokens for a language to be included.
    #[arg(long, default_value_t = DEFAULT_SELECTION_THRESHOLD)]
    pub threshold: u64,
}

impl SourceArgs {
    fn selection(&self) -> Result<Selection> {
        match &self.stats {
            Some(path) => Ok(select_from_stats(&CorpusStats::from_csv(&read_text(path)?, None)?, self.threshold)),
            None => Ok(select_from_registry(&load_registry(self.registry.as_deref(), self.threshold)?, self.threshold)),
        }
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "registry": self.registry.as_ref().map(|p| p.display().to_string()),
            "stats": self.stats.as_ref().map(|p| p.display().to_string()),
            "threshold": self.threshold,
        })
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub source: SourceArgs,
}

pub fn select(ctx: &mut Ctx, args: &SelectArgs) -> Result<()> {
    let selection = args.source.selection()?;
    let mut text = String::new();
    let mut csv = String::from("code,raw_total,status\n");
    for (label, rows) in [("included", &selection.included), ("excluded", &selection.excluded)] {
        let _ = writeln!(text, "{label} {}", rows.len());
        for (code, raw) in rows {
            let _ = writeln!(text, "  {:<12} {raw:>16}", code.as_str());
            let _ = writeln!(csv, "{},{raw},{label}", code.as_str());
        }
    }
    print!("{text}");
    ctx.out.file("selection.csv", &csv)?;
    ctx.out.run_record("select", args.source.describe())
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Monolingual token budget N.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Maximum epochs over any language.
    #[arg(long)]
    pub epoch_cap: Option<u64>,
}

impl BudgetArgs {
    fn sampler_config(&self, ctx: &Ctx, threshold: u64) -> Result<SamplerConfig> {
        let budget_n = self
            .budget
            .or(ctx.config.as_ref().map(|c| c.budget_n))
            .ok_or_else(|| usage("no budget: pass --budget or a --config with budget_N"))?;
        let epoch_cap = self.epoch_cap.or(ctx.config.as_ref().map(|c| c.epoch_cap)).unwrap_or(DEFAULT_EPOCH_CAP);
        let config = SamplerConfig { budget_n, epoch_cap, selection_threshold: threshold, seed: ctx.seed() };
        config.validate()?;
        Ok(config)
    }
}

fn allocate(ctx: &Ctx, source: &SourceArgs, budget: &BudgetArgs) -> Result<(SamplerConfig, SamplingPlan)> {
    let config = budget.sampler_config(ctx, source.threshold)?;
    let plan = unimax_allocate(&source.selection()?.included_totals(), &config)?;
    Ok((config, plan))
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Reference allocations (`code,allocated` CSV) to compare against.
    #[arg(long)]
    pub against: Option<PathBuf>,
    /// Allowed absolute deviation from the reference, in tokens.
    #[arg(long, default_value_t = 2)]
    pub tolerance: u64,
    /// Per-document token index (`lang,doc_id,tokens` CSV); writes a
    /// document schedule.
    #[arg(long)]
    pub doc_index: Option<PathBuf>,
}

pub fn plan(ctx: &mut Ctx, args: &PlanArgs) -> Result<()> {
    let (config, plan) = allocate(ctx, &args.source, &args.budget)?;
    print!("{}", plan.summary());
    ctx.out.file("plan.csv", &plan.to_csv())?;
    if let Some(path) = &args.doc_index {
        let index = parse_doc_index(&read_text(path)?)?;
        let schedule = schedule_documents(&plan, &index, config.seed, ctx.workers())?;
        for lang in schedule.languages.iter().filter(|l| l.deficit() > 0) {
            log::info!("{}: {} tokens short of the allocation", lang.lang, lang.deficit());
        }
        ctx.out.file("schedule.json", &schedule.to_json())?;
    }
    let mut effective = args.source.describe();
    effective["sampler"] = serde_json::to_value(&config)?;
    effective["doc_index"] = json!(args.doc_index.as_ref().map(|p| p.display().to_string()));
    if let Some(path) = &args.against {
        let reference = parse_code_value_csv(&read_text(path)?);
        if reference.is_empty() {
            bail!("{} holds no reference allocations", path.display());
        }
        let cmp = plan.compare(&reference, args.tolerance);
        for (code, expected, actual) in &cmp.deviations {
            match actual {
                Some(actual) => println!("  {code}: expected {expected}, got {actual}"),
                None => println!("  {code}: expected {expected}, not allocated"),
            }
        }
        println!("{}/{} match (tolerance {})", cmp.matched, cmp.total, cmp.tolerance);
        if !cmp.all_match() {
            bail!("{} of {} allocations fall outside the tolerance", cmp.deviations.len(), cmp.total);
        }
        effective["against"] = json!(path.display().to_string());
        effective["tolerance"] = json!(args.tolerance);
    }
    ctx.out.run_record("plan", effective)
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Recipe name from the recipe table; defaults to the --config recipe.
    #[arg(long)]
    pub recipe: Option<String>,
    /// Recipe table (TOML); defaults to the bundled reference recipes.
    #[arg(long)]
    pub recipes: Option<PathBuf>,
    /// Interleaving chunk size in tokens.
    #[arg(long, default_value_t = DEFAULT_CHUNK_TOKENS)]
    pub chunk_tokens: u64,
    /// Split the synthetic component into one stream per language.
    #[arg(long)]
    pub split_synth: bool,
}

fn resolve_recipe(ctx: &Ctx, args: &CompileArgs) -> Result<Recipe> {
    if let Some(name) = &args.recipe {
        let table = match &args.recipes {
            Some(path) => parse_recipe_table(&read_text(path)?)?,
            None => reference_recipes(),
        };
        let names: Vec<String> = table.iter().map(|r| r.name.clone()).collect();
        return table
            .into_iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| usage(format!("unknown recipe {name:?}; known: {}", names.join(", "))));
    }
    match &ctx.config {
        Some(config) => Ok(config.recipe()),
        None => Err(usage("no recipe: pass --recipe or --config")),
    }
}

pub fn compile(ctx: &mut Ctx, args: &CompileArgs) -> Result<()> {
    let recipe = resolve_recipe(ctx, args)?;
    let (config, plan) = allocate(ctx, &args.source, &args.budget)?;
    let synth_by_lang = if args.split_synth {
        Some(quota_languages(&load_registry(args.source.registry.as_deref(), args.source.threshold)?))
    } else {
        None
    };
    let manifest = compile_recipe_with(&plan, &recipe, config.seed, args.chunk_tokens, synth_by_lang.as_ref())?;
    let mut text = format!("recipe {}\n", manifest.recipe);
    let _ = writeln!(text, "  {:<10} {:>16}", "mono", manifest.monolingual_total);
    for (component, budget) in &manifest.component_budgets {
        let _ = writeln!(text, "  {:<10} {budget:>16}", component.as_str());
    }
    let _ = writeln!(text, "  {:<10} {:>16} ({:.2}B)", "total", manifest.grand_total, manifest.grand_total as f64 / 1e9);
    let _ = writeln!(text, "  streams {}", manifest.streams.len());
    for warning in &manifest.warnings {
        let _ = writeln!(text, "warning: {warning}");
    }
    print!("{text}");

    let mut effective = args.source.describe();
    effective["sampler"] = serde_json::to_value(&config)?;
    effective["recipe"] = serde_json::to_value(&recipe)?;
    effective["chunk_tokens"] = json!(args.chunk_tokens);
    effective["split_synth"] = json!(args.split_synth);
    let mut value = serde_json::to_value(&manifest)?;
    value["effective_config"] = effective.clone();
    let mut body = serde_json::to_string_pretty(&value)?;
    body.push('\n');
    ctx.out.file("mixture.json", &body)?;
    ctx.out.run_record("compile", effective)
}

#[derive(Debug, Args)]
pub struct SynthQuotaArgs {
    /// Registry CSV; defaults to the bundled reference registry.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Domain totals (`domain,tokens` CSV); defaults to the bundled table.
    #[arg(long)]
    pub domains: Option<PathBuf>,
}

pub fn synth_quota(ctx: &mut Ctx, args: &SynthQuotaArgs) -> Result<()> {
    let registry = load_registry(args.registry.as_deref(), DEFAULT_SELECTION_THRESHOLD)?;
    let domains: BTreeMap<String, u64> = match &args.domains {
        Some(path) => parse_code_value_csv(&read_text(path)?).into_iter().collect(),
        None => synthetic_domains().into_iter().collect(),
    };
    let langs: BTreeMap<LanguageCode, u64> = quota_languages(&registry);
    let quota = allocate_synth_quota(&langs, &domains)?;
    let total: u64 = langs.values().sum();
    println!("{} languages x {} domains, {total} tokens", langs.len(), domains.len());
    for (domain, tokens) in quota.allocated_domain_totals() {
        println!("  {domain:<24} {tokens:>14}");
    }
    ctx.out.file("synth_quota.csv", &quota.to_csv())?;
    ctx.out.run_record(
        "synth-quota",
        json!({
            "registry": args.registry.as_ref().map(|p| p.display().to_string()),
            "domains": args.domains.as_ref().map(|p| p.display().to_string()),
        }),
    )
}
