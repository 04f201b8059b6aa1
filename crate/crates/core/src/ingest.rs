//! Document streaming, tokenization and per-language/per-source token
//! statistics.
//!
//! Corpus files are JSON lines with exactly the keys `id`, `lang`, `source`
//! and `text`. Directories are walked recursively and `*.jsonl` files are
//! read in sorted path order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::fnv1a64;
use crate::parallel;
use crate::registry::{LanguageCode, SourceId};

/// First id available to hashed word tokens; 0..=255 are bytes, 256/257 are
/// the default eos/pad.
pub const FIRST_WORD_ID: u32 = 258;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid document {id:?}: {reason}")]
    InvalidDocument { id: String, reason: String },
    #[error("{path}:{line}: {reason}")]
    BadLine { path: PathBuf, line: usize, reason: String },
    #[error("invalid tokenizer spec: {0}")]
    InvalidTokenizer(String),
    #[error("tokenizer {0:?} is external and has no registered implementation")]
    UnsupportedTokenizer(String),
    #[error("external tokenizer emitted reserved id {id} for document {doc:?}")]
    ReservedIdEmitted { doc: String, id: u32 },
    #[error("cannot merge statistics produced by tokenizer {left:?} with {right:?}")]
    TokenizerMismatch { left: String, right: String },
    #[error("malformed stats table: {0}")]
    MalformedStats(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// A corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Document {
    pub id: String,
    pub lang: LanguageCode,
    pub source: SourceId,
    pub text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    id: String,
    lang: String,
    source: String,
    text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, lang: &str, source: &str, text: impl Into<String>) -> Result<Self, IngestError> {
        let id = id.into();
        if id.is_empty() {
            return Err(IngestError::InvalidDocument { id, reason: "empty id".into() });
        }
        let lang = LanguageCode::new(lang).map_err(|e| IngestError::InvalidDocument { id: id.clone(), reason: e.to_string() })?;
        let source = source.parse().map_err(|reason| IngestError::InvalidDocument { id: id.clone(), reason })?;
        Ok(Self { id, lang, source, text: text.into() })
    }

    /// Parses one JSON line. Errors name the document id when it is readable.
    pub fn from_json_line(line: &str) -> Result<Self, IngestError> {
        let raw: RawDocument = serde_json::from_str(line).map_err(|e| IngestError::InvalidDocument {
            id: serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_owned))
                .unwrap_or_default(),
            reason: e.to_string(),
        })?;
        Self::new(raw.id, &raw.lang, &raw.source, raw.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TokenizerKind {
    Byte,
    Whitespace,
    External(String),
}

impl fmt::Display for TokenizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenizerKind::Byte => f.write_str("byte"),
            TokenizerKind::Whitespace => f.write_str("whitespace"),
            TokenizerKind::External(name) => write!(f, "external:{name}"),
        }
    }
}

impl std::str::FromStr for TokenizerKind {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "byte" => Ok(TokenizerKind::Byte),
            "whitespace" => Ok(TokenizerKind::Whitespace),
            other => match other.strip_prefix("external:") {
                Some(name) if !name.is_empty() => Ok(TokenizerKind::External(name.to_owned())),
                _ => Err(IngestError::InvalidTokenizer(format!("unknown tokenizer kind {s:?}"))),
            },
        }
    }
}

impl TryFrom<String> for TokenizerKind {
    type Error = IngestError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TokenizerKind> for String {
    fn from(kind: TokenizerKind) -> Self {
        kind.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerSpec {
    pub kind: TokenizerKind,
    pub vocab_size: u32,
    pub eos_id: u32,
    pub pad_id: u32,
}

impl Default for TokenizerSpec {
    fn default() -> Self {
        Self::byte()
    }
}

impl TokenizerSpec {
    /// 256 byte ids plus eos = 256 and pad = 257.
    pub fn byte() -> Self {
        Self { kind: TokenizerKind::Byte, vocab_size: 258, eos_id: 256, pad_id: 257 }
    }

    pub fn whitespace(vocab_size: u32) -> Self {
        Self { kind: TokenizerKind::Whitespace, vocab_size, eos_id: 256, pad_id: 257 }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |msg: String| Err(IngestError::InvalidTokenizer(msg));
        if self.eos_id == self.pad_id {
            return bad(format!("eos and pad share id {}", self.eos_id));
        }
        if self.eos_id >= self.vocab_size || self.pad_id >= self.vocab_size {
            return bad(format!("eos {} / pad {} must be below vocab size {}", self.eos_id, self.pad_id, self.vocab_size));
        }
        match self.kind {
            TokenizerKind::Byte => {
                if self.vocab_size < 258 {
                    return bad(format!("byte tokenizer needs vocab_size >= 258, got {}", self.vocab_size));
                }
                if self.eos_id < 256 || self.pad_id < 256 {
                    return bad("byte tokenizer reserves ids 0..=255 for bytes".into());
                }
            }
            TokenizerKind::Whitespace => {
                if self.vocab_size <= FIRST_WORD_ID {
                    return bad(format!("whitespace tokenizer needs vocab_size > 258, got {}", self.vocab_size));
                }
                if self.eos_id >= FIRST_WORD_ID || self.pad_id >= FIRST_WORD_ID {
                    return bad("whitespace tokenizer needs eos/pad below 258".into());
                }
            }
            TokenizerKind::External(_) => {}
        }
        Ok(())
    }

    /// Tag attached to statistics so counts from different tokenizers are
    /// never mixed.
    pub fn tag(&self) -> String {
        format!("{}/{}", self.kind, self.vocab_size)
    }
}

/// Implementation hook for `external:<name>` tokenizers.
pub trait ExternalTokenizer: Send + Sync {
    fn encode(&self, text: &str) -> Vec<u32>;
}

/// A validated tokenizer ready to encode text.
#[derive(Clone)]
pub struct Tokenizer {
    spec: TokenizerSpec,
    external: Option<Arc<dyn ExternalTokenizer>>,
}

impl fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tokenizer").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Tokenizer {
    pub fn new(spec: TokenizerSpec) -> Result<Self, IngestError> {
        spec.validate()?;
        if let TokenizerKind::External(name) = &spec.kind {
            return Err(IngestError::UnsupportedTokenizer(name.clone()));
        }
        Ok(Self { spec, external: None })
    }

    pub fn with_external(spec: TokenizerSpec, imp: Arc<dyn ExternalTokenizer>) -> Result<Self, IngestError> {
        spec.validate()?;
        if !matches!(spec.kind, TokenizerKind::External(_)) {
            return Err(IngestError::InvalidTokenizer("implementation supplied for a built-in kind".into()));
        }
        Ok(Self { spec, external: Some(imp) })
    }

    pub fn spec(&self) -> &TokenizerSpec {
        &self.spec
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>, IngestError> {
        match &self.spec.kind {
            TokenizerKind::Byte => Ok(text.bytes().map(u32::from).collect()),
            TokenizerKind::Whitespace => {
                let span = u64::from(self.spec.vocab_size - FIRST_WORD_ID);
                Ok(text.split_whitespace().map(|word| FIRST_WORD_ID + (fnv1a64(&[word.as_bytes()]) % span) as u32).collect())
            }
            TokenizerKind::External(_) => {
                let imp = self.external.as_ref().expect("external tokenizers are built with an implementation");
                let ids = imp.encode(text);
                if let Some(&id) = ids.iter().find(|&&id| id == self.spec.eos_id || id == self.spec.pad_id) {
                    return Err(IngestError::ReservedIdEmitted { doc: String::new(), id });
                }
                Ok(ids)
            }
        }
    }

    /// Token count without materializing ids where possible.
    pub fn count(&self, text: &str) -> Result<u64, IngestError> {
        match self.spec.kind {
            TokenizerKind::Byte => Ok(text.len() as u64),
            TokenizerKind::Whitespace => Ok(text.split_whitespace().count() as u64),
            TokenizerKind::External(_) => self.encode(text).map(|ids| ids.len() as u64),
        }
    }
}

/// Tokenizes one document with a built-in tokenizer.
pub fn tokenize(doc: &Document, spec: &TokenizerSpec) -> Result<Vec<u32>, IngestError> {
    Tokenizer::new(spec.clone())?.encode(&doc.text)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub documents: u64,
    pub tokens: u64,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.documents += rhs.documents;
        self.tokens += rhs.tokens;
    }
}

/// Document and token counts per (language, source).
///
/// Per-language totals are derived from the cells, so they always equal the
/// sum of their parts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    /// Tokenizer tag; `None` for empty statistics that can merge with anything.
    pub tokenizer: Option<String>,
    pub cells: BTreeMap<(LanguageCode, SourceId), Counts>,
}

impl CorpusStats {
    pub fn new(tokenizer: impl Into<String>) -> Self {
        Self { tokenizer: Some(tokenizer.into()), cells: BTreeMap::new() }
    }

    pub fn record(&mut self, lang: &LanguageCode, source: &SourceId, tokens: u64) {
        let cell = self.cells.entry((lang.clone(), source.clone())).or_default();
        cell.documents += 1;
        cell.tokens += tokens;
    }

    pub fn totals_by_lang(&self) -> BTreeMap<LanguageCode, Counts> {
        let mut out: BTreeMap<LanguageCode, Counts> = BTreeMap::new();
        for ((lang, _), counts) in &self.cells {
            *out.entry(lang.clone()).or_default() += *counts;
        }
        out
    }

    pub fn lang_tokens(&self, lang: &LanguageCode) -> u64 {
        self.cells.iter().filter(|((l, _), _)| l == lang).map(|(_, c)| c.tokens).sum()
    }

    pub fn total(&self) -> Counts {
        let mut total = Counts::default();
        for counts in self.cells.values() {
            total += *counts;
        }
        total
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// CSV with header `lang,source,documents,tokens`, rows sorted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lang,source,documents,tokens\n");
        for ((lang, source), c) in &self.cells {
            out.push_str(&format!("{lang},{source},{},{}\n", c.documents, c.tokens));
        }
        out
    }

    pub fn from_csv(text: &str, tokenizer: Option<String>) -> Result<Self, IngestError> {
        let mut stats = CorpusStats { tokenizer, cells: BTreeMap::new() };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        for row in reader.records() {
            let row = row.map_err(|e| IngestError::MalformedStats(e.to_string()))?;
            let bad = |what: &str| IngestError::MalformedStats(format!("{what} in row {:?}", row));
            let lang = LanguageCode::new(row.get(0).ok_or_else(|| bad("missing lang"))?).map_err(|_| bad("bad lang"))?;
            let source: SourceId = row.get(1).ok_or_else(|| bad("missing source"))?.parse().map_err(|_| bad("bad source"))?;
            let documents = row.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad documents"))?;
            let tokens = row.get(3).and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad tokens"))?;
            *stats.cells.entry((lang, source)).or_default() += Counts { documents, tokens };
        }
        Ok(stats)
    }
}

/// Pointwise sum of two statistics tables. Fails only when both carry
/// different tokenizer tags.
pub fn merge_stats(a: &CorpusStats, b: &CorpusStats) -> Result<CorpusStats, IngestError> {
    let tokenizer = match (&a.tokenizer, &b.tokenizer) {
        (Some(x), Some(y)) if x != y => {
            return Err(IngestError::TokenizerMismatch { left: x.clone(), right: y.clone() });
        }
        (x, y) => x.clone().or_else(|| y.clone()),
    };
    let mut cells = a.cells.clone();
    for (key, counts) in &b.cells {
        *cells.entry(key.clone()).or_default() += *counts;
    }
    Ok(CorpusStats { tokenizer, cells })
}

/// Counts tokens for every document, splitting the work over `workers`
/// partitions. The result is identical for any worker count.
pub fn accumulate_stats(docs: &[Document], tokenizer: &Tokenizer, workers: usize) -> Result<CorpusStats, IngestError> {
    let tag = tokenizer.spec().tag();
    let parts = parallel::partition(docs, parallel::effective_workers(workers));
    let partials = parallel::map(&parts, workers, |part| {
        let mut stats = CorpusStats::new(tag.clone());
        for doc in part.iter() {
            let tokens = tokenizer.count(&doc.text).map_err(|e| with_doc_id(e, &doc.id))?;
            stats.record(&doc.lang, &doc.source, tokens);
        }
        Ok::<_, IngestError>(stats)
    });
    let mut total = CorpusStats::new(tag);
    for partial in partials {
        total = merge_stats(&total, &partial?)?;
    }
    Ok(total)
}

/// Streaming variant: consumes documents in batches of `batch_size`,
/// stopping at the first error in stream order.
pub fn accumulate_stats_stream<I>(docs: I, tokenizer: &Tokenizer, workers: usize, batch_size: usize) -> Result<CorpusStats, IngestError>
where
    I: IntoIterator<Item = Result<Document, IngestError>>,
{
    let mut total = CorpusStats::new(tokenizer.spec().tag());
    let mut batch = Vec::with_capacity(batch_size.max(1));
    let mut iter = docs.into_iter();
    loop {
        batch.clear();
        for doc in iter.by_ref().take(batch_size.max(1)) {
            batch.push(doc?);
        }
        if batch.is_empty() {
            return Ok(total);
        }
        total = merge_stats(&total, &accumulate_stats(&batch, tokenizer, workers)?)?;
    }
}

fn with_doc_id(err: IngestError, id: &str) -> IngestError {
    match err {
        IngestError::ReservedIdEmitted { id: token, .. } => IngestError::ReservedIdEmitted { doc: id.to_owned(), id: token },
        other => other,
    }
}

/// Expands files and directories into a sorted list of `.jsonl` files.
pub fn collect_input_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, IngestError> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = walkdir::WalkDir::new(path)
                .sort_by_file_name()
                .into_iter()
                .filter_map(Result::ok)
                .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "jsonl"))
                .map(|e| e.into_path())
                .collect();
            found.sort();
            files.extend(found);
        } else if path.exists() {
            files.push(path.clone());
        } else {
            return Err(IngestError::Io {
                path: path.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            });
        }
    }
    Ok(files)
}

/// Lazily reads documents from one JSON-lines file. Blank lines are skipped.
pub fn read_documents(path: &Path) -> Result<impl Iterator<Item = Result<Document, IngestError>>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_owned(), source })?;
    let path = path.to_owned();
    Ok(BufReader::new(file).lines().enumerate().filter_map(move |(idx, line)| match line {
        Err(source) => Some(Err(IngestError::Io { path: path.clone(), source })),
        Ok(line) if line.trim().is_empty() => None,
        Ok(line) => Some(Document::from_json_line(&line).map_err(|e| match e {
            IngestError::InvalidDocument { id, reason } => {
                IngestError::BadLine { path: path.clone(), line: idx + 1, reason: format!("invalid document {id:?}: {reason}") }
            }
            other => other,
        })),
    }))
}

/// Reads every document under `paths` in deterministic order.
pub fn read_all_documents(paths: &[PathBuf]) -> Result<Vec<Document>, IngestError> {
    let mut docs = Vec::new();
    for file in collect_input_files(paths)? {
        for doc in read_documents(&file)? {
            docs.push(doc?);
        }
    }
    Ok(docs)
}
