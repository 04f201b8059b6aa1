//! pack and verify.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use mixforge::ingest::{Document, Tokenizer};
use mixforge::packing::{
    pack_parallel, verify_manifest, write_shards, PackConfig, ShardMeta, TokenizedDoc, DEFAULT_CONTEXT_LEN, MANIFEST_NAME,
};
use mixforge::parallel;
use serde_json::json;

use super::{document_stream, parse_tokenizer, path_strings, Ctx};

#[derive(Debug, Args)]
pub struct PackArgs {
    /// JSON-lines documents or directories containing them, packed in
    /// sorted file order.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// `byte` or `whitespace:<vocab>`; also fixes the eos and pad ids.
    #[arg(long, default_value = "byte")]
    pub tokenizer: String,
    /// Sequence length in tokens.
    #[arg(long)]
    pub context_len: Option<usize>,
    /// Sequences per shard file.
    #[arg(long, default_value_t = 1024)]
    pub shard_size: usize,
    /// Recipe name recorded in the manifest.
    #[arg(long)]
    pub recipe: Option<String>,
}

fn is_shard_name(name: &str) -> bool {
    name.strip_prefix("shard-").and_then(|r| r.strip_suffix(".jsonl")).is_some_and(|n| n.bytes().all(|b| b.is_ascii_digit()))
}

pub fn pack(ctx: &mut Ctx, args: &PackArgs) -> Result<()> {
    ctx.out.require("pack")?;
    let spec = parse_tokenizer(&args.tokenizer)?;
    let tokenizer = Tokenizer::new(spec.clone())?;
    let context_len = args.context_len.or(ctx.config.as_ref().map(|c| c.context_len)).unwrap_or(DEFAULT_CONTEXT_LEN);
    let recipe = args.recipe.clone().or(ctx.config.as_ref().map(|c| c.name.clone())).unwrap_or_else(|| "custom".into());
    let config = PackConfig { context_len, eos_id: spec.eos_id, pad_id: spec.pad_id, shard_size: args.shard_size, seed: ctx.seed() };
    config.validate()?;

    let docs = document_stream(&args.inputs)?.collect::<Result<Vec<Document>, _>>()?;
    let tokenized = parallel::map(&docs, ctx.workers(), |doc| {
        tokenizer.encode(&doc.text).map(|tokens| TokenizedDoc { doc_id: doc.id.clone(), lang: doc.lang.as_str().to_owned(), tokens })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let input_tokens: u64 = tokenized.iter().map(|d| d.tokens.len() as u64).sum();
    let seqs = pack_parallel(&tokenized, &config, ctx.workers())?;

    let effective = json!({
        "inputs": path_strings(&args.inputs),
        "tokenizer": spec,
        "pack": config,
        "recipe": recipe,
    });
    let meta = ShardMeta { recipe, documents: docs.len() as u64, input_tokens, config: effective.clone() };
    let staging = ctx.out.staging_dir()?;
    let manifest = write_shards(&seqs, &staging, &config, &meta, ctx.workers())?;
    let names: BTreeSet<&str> = manifest.shards.iter().map(|s| s.name.as_str()).collect();
    for name in &names {
        ctx.out.track(name);
    }
    ctx.out.track(MANIFEST_NAME);

    let out_dir = ctx.global.out.clone().expect("checked above");
    for entry in fs::read_dir(&out_dir).with_context(|| format!("listing {}", out_dir.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if is_shard_name(&name) && !names.contains(name.as_str()) {
            fs::remove_file(entry.path()).with_context(|| format!("removing stale {}", entry.path().display()))?;
        }
    }
    println!(
        "{} documents, {} tokens -> {} sequences of {} in {} shards ({} non-pad tokens)",
        meta.documents,
        input_tokens,
        manifest.total_sequences,
        context_len,
        manifest.shards.len(),
        manifest.total_non_pad_tokens
    );
    ctx.out.run_record("pack", effective)
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Shard directory containing manifest.json.
    #[arg(long)]
    pub dir: PathBuf,
}

pub fn verify(ctx: &mut Ctx, args: &VerifyArgs) -> Result<()> {
    let report = verify_manifest(&args.dir, ctx.workers())?;
    let text = report.to_text();
    print!("{text}");
    if !report.all_pass() {
        bail!("verification failed for {}", args.dir.display());
    }
    ctx.out.file("verify.txt", &text)?;
    ctx.out.run_record("verify", json!({ "dir": args.dir.display().to_string() }))
}
