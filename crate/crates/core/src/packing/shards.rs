//! JSON-lines shard files and their checksummed manifest.
//!
//! Each line is `{"seq":[..],"spans":[[start,end,"doc_id","lang"],..],"pad":n}`
//! with no extra whitespace. `manifest.json` is written last, with sorted
//! keys, through a temporary file and rename.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PackConfig, PackedSequence, PackingError};
use crate::digest::sha256_hex;
use crate::parallel;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub name: String,
    pub non_pad_tokens: u64,
    pub num_sequences: u64,
    pub sha256: String,
}

/// Provenance recorded alongside the shards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShardMeta {
    pub recipe: String,
    /// Documents packed; each contributes one eos.
    pub documents: u64,
    /// Document tokens before eos insertion.
    pub input_tokens: u64,
    /// Effective configuration of the producing run, echoed verbatim.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub context_len: usize,
    pub eos_id: u32,
    pub pad_id: u32,
    pub meta: ShardMeta,
    pub seed: u64,
    pub shard_size: usize,
    pub shards: Vec<ShardEntry>,
    pub total_non_pad_tokens: u64,
    pub total_sequences: u64,
}

impl ShardManifest {
    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("manifest serializes");
        let mut text = serde_json::to_string_pretty(&sort_keys(value)).expect("manifest serializes");
        text.push('\n');
        text
    }
}

fn sort_keys(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let sorted: std::collections::BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn shard_name(index: usize) -> String {
    format!("shard-{index:05}.jsonl")
}

fn is_shard_name(name: &str) -> bool {
    name.strip_prefix("shard-")
        .and_then(|rest| rest.strip_suffix(".jsonl"))
        .is_some_and(|digits| digits.len() == 5 && digits.bytes().all(|b| b.is_ascii_digit()))
}

fn render_sequence(seq: &PackedSequence, out: &mut String) {
    out.push_str("{\"seq\":[");
    for (i, t) in seq.tokens.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{t}");
    }
    out.push_str("],\"spans\":[");
    for (i, span) in seq.spans.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let id = serde_json::to_string(&span.doc_id).expect("string serializes");
        let lang = serde_json::to_string(&span.lang).expect("string serializes");
        let _ = write!(out, "[{},{},{id},{lang}]", span.start, span.end);
    }
    let _ = writeln!(out, "],\"pad\":{}}}", seq.pad_count);
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PackingError + '_ {
    move |source| PackingError::Io { path: path.display().to_string(), source }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PackingError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Writes `seqs` as shards of `config.shard_size` sequences, then the
/// manifest, then re-verifies everything on disk. Shards are rendered,
/// hashed and written in parallel; the bytes do not depend on `workers`.
pub fn write_shards(
    seqs: &[PackedSequence],
    dir: &Path,
    config: &PackConfig,
    meta: &ShardMeta,
    workers: usize,
) -> Result<ShardManifest, PackingError> {
    config.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let chunks: Vec<&[PackedSequence]> = seqs.chunks(config.shard_size).collect();
    let written = parallel::map_range(chunks.len(), workers, |i| {
        let chunk = chunks[i];
        let mut text = String::new();
        for seq in chunk {
            render_sequence(seq, &mut text);
        }
        let name = shard_name(i);
        write_atomic(&dir.join(&name), text.as_bytes())?;
        Ok(ShardEntry {
            sha256: sha256_hex(text.as_bytes()),
            non_pad_tokens: chunk.iter().map(|s| s.non_pad_tokens() as u64).sum(),
            num_sequences: chunk.len() as u64,
            name,
        })
    });
    let shards = written.into_iter().collect::<Result<Vec<_>, PackingError>>()?;
    remove_stale_shards(dir, &shards)?;

    let manifest = ShardManifest {
        context_len: config.context_len,
        eos_id: config.eos_id,
        pad_id: config.pad_id,
        meta: meta.clone(),
        seed: config.seed,
        shard_size: config.shard_size,
        total_non_pad_tokens: shards.iter().map(|s| s.non_pad_tokens).sum(),
        total_sequences: shards.iter().map(|s| s.num_sequences).sum(),
        shards,
    };
    write_atomic(&dir.join(MANIFEST_NAME), manifest.to_json().as_bytes())?;
    verify_manifest(dir, workers)?.into_result()?;
    Ok(manifest)
}

fn remove_stale_shards(dir: &Path, keep: &[ShardEntry]) -> Result<(), PackingError> {
    let keep: BTreeSet<&str> = keep.iter().map(|s| s.name.as_str()).collect();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if is_shard_name(&name) && !keep.contains(name.as_str()) {
            fs::remove_file(entry.path()).map_err(io_err(&entry.path()))?;
        }
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<ShardManifest, PackingError> {
    let path = dir.join(MANIFEST_NAME);
    if !path.is_file() {
        return Err(PackingError::MissingManifest(path.display().to_string()));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| PackingError::MalformedManifest(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShardCheck {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub num_sequences: u64,
    pub non_pad_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub dir: PathBuf,
    pub shards: Vec<ShardCheck>,
    pub recounted_non_pad_tokens: u64,
    pub manifest_non_pad_tokens: u64,
    /// Manifest total equals input tokens plus one eos per document.
    pub conservation_ok: bool,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.conservation_ok && self.recounted_non_pad_tokens == self.manifest_non_pad_tokens && self.shards.iter().all(|s| s.ok)
    }

    /// First failure as a [`PackingError::ManifestMismatch`].
    pub fn into_result(self) -> Result<Self, PackingError> {
        if let Some(bad) = self.shards.iter().find(|s| !s.ok) {
            return Err(PackingError::ManifestMismatch { shard: bad.name.clone(), reason: bad.reason.clone().unwrap_or_default() });
        }
        if !self.all_pass() {
            return Err(PackingError::ManifestMismatch {
                shard: MANIFEST_NAME.into(),
                reason: format!(
                    "token totals disagree: recount {}, manifest {}",
                    self.recounted_non_pad_tokens, self.manifest_non_pad_tokens
                ),
            });
        }
        Ok(self)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.shards {
            let status = if s.ok { "PASS" } else { "FAIL" };
            let _ = write!(out, "{status} {} ({} sequences, {} tokens)", s.name, s.num_sequences, s.non_pad_tokens);
            if let Some(reason) = &s.reason {
                let _ = write!(out, ": {reason}");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "{} non-pad tokens: recount {} / manifest {}; conservation {}",
            if self.all_pass() { "PASS" } else { "FAIL" },
            self.recounted_non_pad_tokens,
            self.manifest_non_pad_tokens,
            if self.conservation_ok { "ok" } else { "violated" }
        );
        out
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShardLine {
    seq: Vec<u32>,
    spans: Vec<(usize, usize, String, String)>,
    pad: usize,
}

fn check_shard(dir: &Path, entry: &ShardEntry, manifest: &ShardManifest) -> ShardCheck {
    let mut check = ShardCheck { name: entry.name.clone(), ok: false, reason: None, num_sequences: 0, non_pad_tokens: 0 };
    let bytes = match fs::read(dir.join(&entry.name)) {
        Ok(bytes) => bytes,
        Err(e) => {
            check.reason = Some(format!("cannot read: {e}"));
            return check;
        }
    };
    if sha256_hex(&bytes) != entry.sha256 {
        check.reason = Some("sha256 mismatch".into());
    }
    let Ok(text) = std::str::from_utf8(&bytes) else {
        check.reason = Some("not UTF-8".into());
        return check;
    };
    for (i, line) in text.lines().enumerate() {
        match serde_json::from_str::<ShardLine>(line) {
            Ok(seq) if seq.seq.len() == manifest.context_len && seq.pad <= seq.seq.len() => {
                check.num_sequences += 1;
                check.non_pad_tokens += (seq.seq.len() - seq.pad) as u64;
                if !spans_tile(&seq.spans, seq.seq.len() - seq.pad) {
                    check.reason.get_or_insert_with(|| format!("line {}: spans do not tile the non-pad prefix", i + 1));
                }
            }
            Ok(_) => {
                check.reason.get_or_insert_with(|| format!("line {}: wrong sequence length", i + 1));
            }
            Err(e) => {
                check.reason.get_or_insert_with(|| format!("line {}: {e}", i + 1));
            }
        }
    }
    if check.reason.is_none() && (check.num_sequences, check.non_pad_tokens) != (entry.num_sequences, entry.non_pad_tokens) {
        check.reason = Some(format!(
            "recount {} sequences / {} tokens, manifest {} / {}",
            check.num_sequences, check.non_pad_tokens, entry.num_sequences, entry.non_pad_tokens
        ));
    }
    check.ok = check.reason.is_none();
    check
}

fn spans_tile(spans: &[(usize, usize, String, String)], non_pad: usize) -> bool {
    let mut expect = 0;
    for (start, end, _, _) in spans {
        if *start != expect || end <= start {
            return false;
        }
        expect = *end;
    }
    expect == non_pad
}

/// Recomputes checksums and counts for every shard listed in the manifest.
pub fn verify_manifest(dir: &Path, workers: usize) -> Result<VerifyReport, PackingError> {
    let manifest = read_manifest(dir)?;
    let shards = parallel::map(&manifest.shards, workers, |entry| check_shard(dir, entry, &manifest));
    let listed: u64 = manifest.shards.iter().map(|s| s.non_pad_tokens).sum();
    let meta = &manifest.meta;
    Ok(VerifyReport {
        dir: dir.to_owned(),
        recounted_non_pad_tokens: shards.iter().map(|s| s.non_pad_tokens).sum(),
        manifest_non_pad_tokens: manifest.total_non_pad_tokens,
        conservation_ok: listed == manifest.total_non_pad_tokens && manifest.total_non_pad_tokens == meta.input_tokens + meta.documents,
        shards,
    })
}
