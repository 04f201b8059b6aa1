pub mod data;
pub mod eval;
pub mod pack;
pub mod translate;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mixforge::fixtures::REFERENCE_REGISTRY_CSV;
use mixforge::ingest::{collect_input_files, read_documents, Document, IngestError, TokenizerSpec};
use mixforge::mixture::RecipeConfig;
use mixforge::registry::{load_registry_with_threshold, parse_registry, Registry};

use crate::output::{usage, Output};
use crate::{Cli, Command, GlobalOpts};

/// Shared state for one invocation.
pub struct Ctx<'a> {
    pub global: &'a GlobalOpts,
    pub config: Option<RecipeConfig>,
    pub out: Output,
}

impl Ctx<'_> {
    pub fn seed(&self) -> u64 {
        self.global.seed.or(self.config.as_ref().map(|c| c.seed)).unwrap_or(0)
    }

    pub fn workers(&self) -> usize {
        self.global.workers
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = match &cli.global.config {
        Some(path) => Some(RecipeConfig::from_path(path)?),
        None => None,
    };
    let mut ctx = Ctx { global: &cli.global, config, out: Output::new(cli.global.out.as_deref()) };
    match &cli.command {
        Command::Stats(args) => data::stats(&mut ctx, args)?,
        Command::Select(args) => data::select(&mut ctx, args)?,
        Command::Plan(args) => data::plan(&mut ctx, args)?,
        Command::Compile(args) => data::compile(&mut ctx, args)?,
        Command::SynthQuota(args) => data::synth_quota(&mut ctx, args)?,
        Command::FilterParallel(args) => translate::filter(&mut ctx, args)?,
        Command::Prompts(args) => translate::prompts(&mut ctx, args)?,
        Command::Jobs(args) => translate::jobs(&mut ctx, args)?,
        Command::Pack(args) => pack::pack(&mut ctx, args)?,
        Command::Verify(args) => pack::verify(&mut ctx, args)?,
        Command::PlanRun(args) => eval::plan_run(&mut ctx, args)?,
        Command::Score(cmd) => eval::score(&mut ctx, cmd)?,
        Command::Aggregate(args) => eval::aggregate(&mut ctx, args)?,
        Command::Report(cmd) => eval::report(&mut ctx, cmd)?,
    }
    for path in ctx.out.commit()? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

/// Loads `path`, or the bundled reference registry when absent.
pub fn load_registry(path: Option<&Path>, threshold: u64) -> Result<Registry> {
    Ok(match path {
        Some(path) => load_registry_with_threshold(path, threshold)?,
        None => parse_registry(REFERENCE_REGISTRY_CSV, threshold)?,
    })
}

/// `byte` or `whitespace:<vocab_size>`.
pub fn parse_tokenizer(text: &str) -> Result<TokenizerSpec> {
    let spec = match text.split_once(':') {
        None if text == "byte" => TokenizerSpec::byte(),
        Some(("whitespace", vocab)) => {
            TokenizerSpec::whitespace(vocab.parse().map_err(|_| usage(format!("bad vocabulary size in {text:?}")))?)
        }
        _ => return Err(usage(format!("unsupported tokenizer {text:?}; use byte or whitespace:<vocab>"))),
    };
    spec.validate()?;
    Ok(spec)
}

/// Documents from every `.jsonl` file under `inputs`, in sorted path order.
pub fn document_stream(inputs: &[PathBuf]) -> Result<impl Iterator<Item = Result<Document, IngestError>>> {
    let files = collect_input_files(inputs)?;
    if files.is_empty() {
        return Err(usage("no .jsonl input files found"));
    }
    let mut streams = Vec::with_capacity(files.len());
    for file in &files {
        streams.push(read_documents(file)?);
    }
    Ok(streams.into_iter().flatten())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn path_strings(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}
