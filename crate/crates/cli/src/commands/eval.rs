//! plan-run, score, aggregate and report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use mixforge::metrics::{
    dchrf, delta, group_average, language_averages, mean_relative_delta, overall_average, round_half_even, ChrfConfig, GroupMode,
    GroupScore, ScoreTable,
};
use mixforge::registry::default_groups;
use mixforge::runplan::{run_card, throughput_and_mfu, EfficiencyRecord, RunConfig, DEFAULT_GLOBAL_BATCH, DEFAULT_PEAK_TFLOPS};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use super::{read_text, Ctx};
use crate::output::usage;

#[derive(Debug, Args)]
pub struct PlanRunArgs {
    /// Training tokens.
    #[arg(long)]
    pub tokens: u64,
    /// Tokens per optimizer step.
    #[arg(long)]
    pub global_batch: Option<u64>,
    #[arg(long, default_value_t = 5e-5)]
    pub peak_lr: f64,
    /// Final learning rate as a fraction of the peak.
    #[arg(long, default_value_t = 0.01)]
    pub min_lr_rate: f64,
    #[arg(long, default_value_t = 0.001)]
    pub warmup_ratio: f64,
    /// Non-embedding parameters, for the 6PT FLOPs estimate.
    #[arg(long)]
    pub params: Option<f64>,
    /// Wall-clock hours; with --gpus and --params adds throughput and MFU.
    #[arg(long, requires = "gpus")]
    pub hours: Option<f64>,
    #[arg(long, requires = "hours")]
    pub gpus: Option<u32>,
    /// Peak dense TFLOPS per GPU.
    #[arg(long, default_value_t = DEFAULT_PEAK_TFLOPS)]
    pub peak_tflops: f64,
}

pub fn plan_run(ctx: &mut Ctx, args: &PlanRunArgs) -> Result<()> {
    let global_batch = args.global_batch.or(ctx.config.as_ref().map(|c| c.batch_tokens)).unwrap_or(DEFAULT_GLOBAL_BATCH);
    let config = RunConfig {
        global_batch,
        peak_lr: args.peak_lr,
        min_lr_rate: args.min_lr_rate,
        warmup_ratio: args.warmup_ratio,
        ..RunConfig::default()
    };
    let hours_and_gpus = args.hours.zip(args.gpus);
    if hours_and_gpus.is_some() && args.params.is_none() {
        return Err(usage("--hours/--gpus need --params"));
    }
    let card = run_card(args.tokens, &config, args.params, hours_and_gpus, args.peak_tflops)?;
    let text = card.to_text();
    print!("{text}");
    ctx.out.file("run_card.txt", &text)?;
    ctx.out.file("lr_schedule.csv", &card.schedule_csv())?;
    ctx.out.run_record(
        "plan-run",
        json!({
            "tokens": args.tokens,
            "run": card.config,
            "params": args.params,
            "hours": args.hours,
            "gpus": args.gpus,
            "peak_tflops": args.peak_tflops,
        }),
    )
}

#[derive(Debug, Subcommand)]
pub enum ScoreCommand {
    /// Corpus-level chrF from line-aligned files; `--doc-k` switches to
    /// document-level chrF over pseudo-documents of k sentences.
    Chrf(ChrfArgs),
}

#[derive(Debug, Args)]
pub struct ChrfArgs {
    /// Hypotheses, one sentence per line.
    #[arg(long)]
    pub hyp: PathBuf,
    /// References, one sentence per line.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub char_order: usize,
    /// 0 for chrF, 2 for chrF++.
    #[arg(long, default_value_t = 0)]
    pub word_order: usize,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Keep whitespace inside character n-grams.
    #[arg(long)]
    pub whitespace: bool,
    /// Sentences per pseudo-document.
    #[arg(long)]
    pub doc_k: Option<usize>,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?.lines().map(str::to_owned).collect())
}

pub fn score(ctx: &mut Ctx, cmd: &ScoreCommand) -> Result<()> {
    let ScoreCommand::Chrf(args) = cmd;
    let config = ChrfConfig {
        char_order: args.char_order,
        word_order: args.word_order,
        beta: args.beta,
        whitespace_in_char_ngrams: args.whitespace,
    };
    let hyp = read_lines(&args.hyp)?;
    let reference = read_lines(&args.reference)?;
    let k = args.doc_k.unwrap_or(1);
    let value = dchrf(&hyp, &reference, k, &config, ctx.workers())?;
    let name = format!("chrF{}{}", args.beta, if args.word_order > 0 { "++" } else { "" });
    let label = match args.doc_k {
        Some(k) => format!("d-{name} (k={k})"),
        None => name,
    };
    println!("{label} = {value:.2}");
    let effective = json!({
        "hyp": args.hyp.display().to_string(),
        "ref": args.reference.display().to_string(),
        "chrf": config,
        "doc_k": args.doc_k,
    });
    let mut body = serde_json::to_string_pretty(&json!({
        "metric": label,
        "score": value,
        "sentences": hyp.len(),
        "effective_config": effective,
    }))?;
    body.push('\n');
    ctx.out.file("score.json", &body)?;
    ctx.out.run_record("score", effective)
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Pooled,
    ByLanguage,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Score table (`model,task,lang,score` CSV).
    #[arg(long)]
    pub scores: PathBuf,
    /// Tasks to leave out; repeatable.
    #[arg(long = "exclude-task")]
    pub exclude_tasks: Vec<String>,
    /// Pool all cells, or average tasks per language first.
    #[arg(long, value_enum, default_value = "pooled")]
    pub mode: ModeArg,
    /// Restrict to these models; repeatable. Every model kept must have
    /// scores in every language group.
    #[arg(long = "model")]
    pub models: Vec<String>,
}

pub fn aggregate(ctx: &mut Ctx, args: &AggregateArgs) -> Result<()> {
    let mut table = ScoreTable::from_csv(&read_text(&args.scores)?)?;
    if !args.models.is_empty() {
        let mut kept = ScoreTable::new();
        for (model, task, lang, score) in table.iter().filter(|(m, ..)| args.models.iter().any(|x| x == m)) {
            kept.insert(model, task, lang, score)?;
        }
        if kept.is_empty() {
            bail!("none of the requested models appear in {}", args.scores.display());
        }
        table = kept;
    }
    let exclude: BTreeSet<String> = args.exclude_tasks.iter().cloned().collect();
    let mode = match args.mode {
        ModeArg::Pooled => GroupMode::Pooled,
        ModeArg::ByLanguage => GroupMode::ByLanguage,
    };
    let scores = group_average(&table, &default_groups(), &exclude, mode, ctx.workers())?;
    print!("{}", GroupScore::render_table(&scores));
    let mut csv = String::from("model,group,mean,cells,languages\n");
    for ((model, group), s) in &scores {
        let _ = writeln!(csv, "{model},{group},{:.4},{},{}", s.mean, s.cells, s.languages);
    }
    ctx.out.file("group_scores.csv", &csv)?;
    ctx.out.run_record(
        "aggregate",
        json!({
            "scores": args.scores.display().to_string(),
            "exclude_tasks": exclude,
            "mode": mode,
            "models": args.models,
        }),
    )
}

/// Tasks averaged per language in the per-language improvement table.
pub const LANGUAGE_TABLE_TASKS: [&str; 7] = ["afrimgsm", "afrimmlu", "afrixnli", "belebele", "flores_comet_eng2xx", "injongo", "sib200"];

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Overall averages and deltas per model.
    TaskResults {
        /// Per-task scores (`model,task,lang,score`).
        #[arg(long)]
        scores: PathBuf,
        /// Published overall values to compare with.
        #[arg(long)]
        reported: Option<PathBuf>,
    },
    /// Averages and relative drops on high-resource languages.
    HrlDrop {
        #[arg(long)]
        table: PathBuf,
    },
    /// Throughput and MFU recomputed from FLOPs, hours and GPU count.
    Efficiency {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PEAK_TFLOPS)]
        peak_tflops: f64,
        #[arg(long, default_value_t = DEFAULT_GLOBAL_BATCH)]
        global_batch: u64,
    },
    /// Per-language base vs adapted averages.
    Languages {
        /// Per-language scores (`model,task,lang,score`).
        #[arg(long)]
        scores: PathBuf,
        /// Base/adapted pairs (`base_model,adapted_model,lang,base,adapted,delta`).
        #[arg(long)]
        pairs: PathBuf,
        /// Tasks to average; repeatable. Defaults to the seven-task set.
        #[arg(long = "task")]
        tasks: Vec<String>,
    },
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    reader.deserialize().collect::<Result<Vec<T>, _>>().with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Deserialize)]
struct ReportedOverall {
    model: String,
    overall: f64,
    base_model: Option<String>,
    delta_abs: Option<f64>,
    delta_rel_pct: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct HrlRow {
    model: String,
    lang: String,
    base: f64,
    adapted: f64,
    delta_rel_pct: f64,
}

#[derive(Debug, Deserialize)]
struct EfficiencyRow {
    model: String,
    gpus: u32,
    steps: u64,
    zflops: f64,
    hours: f64,
    tflops: f64,
    mfu_percent: f64,
}

#[derive(Debug, Deserialize)]
struct ImprovementRow {
    base_model: String,
    adapted_model: String,
    lang: String,
    base: f64,
    adapted: f64,
    delta: f64,
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "off"
    }
}

pub fn report(ctx: &mut Ctx, cmd: &ReportCommand) -> Result<()> {
    let (name, text, csv, effective) = match cmd {
        ReportCommand::TaskResults { scores, reported } => {
            let (text, csv) = task_results(scores, reported.as_deref())?;
            let effective = json!({
                "scores": scores.display().to_string(),
                "reported": reported.as_ref().map(|p| p.display().to_string()),
            });
            ("task_results", text, csv, effective)
        }
        ReportCommand::HrlDrop { table } => {
            let (text, csv) = hrl_drop(table)?;
            ("hrl_drop", text, csv, json!({ "table": table.display().to_string() }))
        }
        ReportCommand::Efficiency { table, peak_tflops, global_batch } => {
            let (text, csv) = efficiency(table, *peak_tflops, *global_batch)?;
            let effective = json!({ "table": table.display().to_string(), "peak_tflops": peak_tflops, "global_batch": global_batch });
            ("efficiency", text, csv, effective)
        }
        ReportCommand::Languages { scores, pairs, tasks } => {
            let tasks: Vec<&str> =
                if tasks.is_empty() { LANGUAGE_TABLE_TASKS.to_vec() } else { tasks.iter().map(String::as_str).collect() };
            let (text, csv) = languages(scores, pairs, &tasks)?;
            let effective = json!({
                "scores": scores.display().to_string(),
                "pairs": pairs.display().to_string(),
                "tasks": tasks,
            });
            ("languages", text, csv, effective)
        }
    };
    print!("{text}");
    ctx.out.file(&format!("report_{name}.txt"), &text)?;
    ctx.out.file(&format!("report_{name}.csv"), &csv)?;
    ctx.out.run_record("report", effective)
}

fn task_results(scores: &Path, reported: Option<&Path>) -> Result<(String, String)> {
    let table = ScoreTable::from_csv(&read_text(scores)?)?;
    let mut overall = BTreeMap::new();
    for model in table.models() {
        let values: Vec<f64> = table.iter().filter(|(m, ..)| *m == model).map(|(.., s)| s).collect();
        overall.insert(model.to_owned(), overall_average(&values)?);
    }
    let reported: Vec<ReportedOverall> = match reported {
        Some(path) => read_rows(path)?,
        None => overall
            .iter()
            .map(|(model, &o)| ReportedOverall { model: model.clone(), overall: o, base_model: None, delta_abs: None, delta_rel_pct: None })
            .collect(),
    };
    let mut text =
        format!("{:<22} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  check\n", "model", "overall", "reported", "delta", "rep", "delta%", "rep");
    let mut csv = String::from("model,overall,reported_overall,delta_abs,reported_delta_abs,delta_rel_pct,reported_delta_rel_pct\n");
    for row in &reported {
        let Some(&ours) = overall.get(&row.model) else {
            bail!("model {:?} has no per-task scores", row.model);
        };
        let mut ok = (ours - row.overall).abs() <= 0.01 + 1e-9;
        let d = match &row.base_model {
            Some(base) => {
                let base_overall = *overall.get(base).with_context(|| format!("base model {base:?} has no scores"))?;
                Some(delta(base_overall, ours)?)
            }
            None => None,
        };
        let fmt_opt = |v: Option<f64>| v.map_or(String::from("-"), |v| format!("{v:.1}"));
        if let Some(d) = d {
            ok &= row.delta_abs.is_none_or(|r| (round_half_even(d.delta_abs, 1) - r).abs() <= 0.1 + 1e-9);
            ok &= row.delta_rel_pct.is_none_or(|r| (round_half_even(d.delta_rel_pct, 1) - r).abs() <= 0.1 + 1e-9);
        }
        let _ = writeln!(
            text,
            "{:<22} {ours:>8.2} {:>8.2} {:>8} {:>8} {:>8} {:>8}  {}",
            row.model,
            row.overall,
            fmt_opt(d.map(|d| d.delta_abs)),
            fmt_opt(row.delta_abs),
            fmt_opt(d.map(|d| d.delta_rel_pct)),
            fmt_opt(row.delta_rel_pct),
            mark(ok)
        );
        let num = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4}"));
        let _ = writeln!(
            csv,
            "{},{ours:.2},{:.2},{},{},{},{}",
            row.model,
            row.overall,
            num(d.map(|d| d.delta_abs)),
            num(row.delta_abs),
            num(d.map(|d| d.delta_rel_pct)),
            num(row.delta_rel_pct)
        );
    }
    Ok((text, csv))
}

fn hrl_drop(path: &Path) -> Result<(String, String)> {
    let rows: Vec<HrlRow> = read_rows(path)?;
    let mut models: Vec<&str> = Vec::new();
    for row in &rows {
        if !models.contains(&row.model.as_str()) {
            models.push(&row.model);
        }
    }
    let mut text =
        format!("{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  check\n", "model", "base", "rep", "adapted", "rep", "delta%", "rep");
    let mut csv = String::from("model,avg_base,avg_adapted,avg_delta_rel_pct,reported_base,reported_adapted,reported_delta_rel_pct\n");
    for model in models {
        let langs: Vec<&HrlRow> = rows.iter().filter(|r| r.model == model && r.lang != "avg").collect();
        let avg = rows.iter().find(|r| r.model == model && r.lang == "avg").with_context(|| format!("no avg row for {model}"))?;
        for row in &langs {
            let d = delta(row.base, row.adapted)?;
            if (d.delta_rel_pct - row.delta_rel_pct).abs() > 0.1 {
                log::warn!("{model}/{}: relative delta {:.2} vs reported {}", row.lang, d.delta_rel_pct, row.delta_rel_pct);
            }
        }
        let pairs: Vec<(f64, f64)> = langs.iter().map(|r| (r.base, r.adapted)).collect();
        let base = overall_average(&pairs.iter().map(|p| p.0).collect::<Vec<_>>())?;
        let adapted = overall_average(&pairs.iter().map(|p| p.1).collect::<Vec<_>>())?;
        let rel = mean_relative_delta(&pairs)?;
        let ok = (base - avg.base).abs() <= 0.1 + 1e-9
            && (adapted - avg.adapted).abs() <= 0.1 + 1e-9
            && (rel - avg.delta_rel_pct).abs() <= 0.1 + 1e-9;
        let _ = writeln!(
            text,
            "{model:<14} {base:>8.2} {:>8.1} {adapted:>8.2} {:>8.1} {rel:>8.2} {:>8.1}  {}",
            avg.base,
            avg.adapted,
            avg.delta_rel_pct,
            mark(ok)
        );
        let _ = writeln!(csv, "{model},{base:.2},{adapted:.2},{rel:.4},{},{},{}", avg.base, avg.adapted, avg.delta_rel_pct);
    }
    Ok((text, csv))
}

fn efficiency(path: &Path, peak: f64, global_batch: u64) -> Result<(String, String)> {
    let rows: Vec<EfficiencyRow> = read_rows(path)?;
    let mut text = format!("{:<18} {:>16} {:>10} {:>10} {:>8} {:>8}  check\n", "model", "tokens", "tflops", "rep", "mfu%", "rep");
    let mut csv = String::from("model,tokens,tflops_total,reported_tflops,mfu_percent,reported_mfu_percent\n");
    for row in &rows {
        let rec = EfficiencyRecord { flops_total: row.zflops * 1e21, wall_hours: row.hours, num_gpus: row.gpus, peak_tflops_per_gpu: peak };
        let t = throughput_and_mfu(&rec)?;
        let tokens = row.steps * global_batch;
        let ok = (t.tflops_total - row.tflops).abs() / row.tflops <= 0.01 && (t.mfu_percent - row.mfu_percent).abs() <= 0.3;
        let _ = writeln!(
            text,
            "{:<18} {tokens:>16} {:>10.0} {:>10.0} {:>8.2} {:>8.2}  {}",
            row.model,
            t.tflops_total,
            row.tflops,
            t.mfu_percent,
            row.mfu_percent,
            mark(ok)
        );
        let _ = writeln!(csv, "{},{tokens},{:.2},{},{:.4},{}", row.model, t.tflops_total, row.tflops, t.mfu_percent, row.mfu_percent);
    }
    Ok((text, csv))
}

fn languages(scores: &Path, pairs: &Path, tasks: &[&str]) -> Result<(String, String)> {
    let table = ScoreTable::from_csv(&read_text(scores)?)?;
    let rows: Vec<ImprovementRow> = read_rows(pairs)?;
    let mut text = format!(
        "{:<16} {:<6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  check\n",
        "adapted", "lang", "base", "rep", "adapted", "rep", "delta", "rep"
    );
    let mut csv = String::from("base_model,adapted_model,lang,base,adapted,delta\n");
    let mut cache: BTreeMap<&str, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.lang != "avg") {
        for model in [row.base_model.as_str(), row.adapted_model.as_str()] {
            cache.entry(model).or_insert_with(|| language_averages(&table, model, tasks));
        }
        let lookup =
            |model: &str| cache[model].get(&row.lang).map(|v| v.0).with_context(|| format!("{model} has no scores for {}", row.lang));
        let (base, adapted) = (lookup(&row.base_model)?, lookup(&row.adapted_model)?);
        let d = adapted - base;
        let ok = (base - row.base).abs() <= 0.1 && (adapted - row.adapted).abs() <= 0.1 && (d - row.delta).abs() <= 0.1;
        let _ = writeln!(
            text,
            "{:<16} {:<6} {base:>8.2} {:>8.1} {adapted:>8.2} {:>8.1} {d:>8.2} {:>8.1}  {}",
            row.adapted_model,
            row.lang,
            row.base,
            row.adapted,
            row.delta,
            mark(ok)
        );
        let _ = writeln!(csv, "{},{},{},{base:.4},{adapted:.4},{d:.4}", row.base_model, row.adapted_model, row.lang);
    }
    Ok((text, csv))
}
