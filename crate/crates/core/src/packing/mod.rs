//! Carry-over sequence packing.
//!
//! Documents are concatenated in stream order, each followed by one eos,
//! and the stream is cut every `context_len` tokens. Documents may straddle
//! sequence boundaries. Only the final sequence is padded.

mod shards;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel;

pub use shards::{
    read_manifest, verify_manifest, write_shards, ShardCheck, ShardEntry, ShardManifest, ShardMeta, VerifyReport, MANIFEST_NAME,
};

pub const DEFAULT_CONTEXT_LEN: usize = 16_384;

#[derive(Debug, Error)]
pub enum PackingError {
    #[error("invalid pack config: {0}")]
    InvalidConfig(String),
    #[error("document {doc_id:?} contains the pad id {pad_id}")]
    PadCollision { doc_id: String, pad_id: u32 },
    #[error("no {0} in shard directory")]
    MissingManifest(String),
    #[error("shard {shard} does not match the manifest: {reason}")]
    ManifestMismatch { shard: String, reason: String },
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackConfig {
    pub context_len: usize,
    pub eos_id: u32,
    pub pad_id: u32,
    /// Sequences per shard file.
    pub shard_size: usize,
    pub seed: u64,
}

impl Default for PackConfig {
    fn default() -> Self {
        Self { context_len: DEFAULT_CONTEXT_LEN, eos_id: 256, pad_id: 257, shard_size: 1024, seed: 0 }
    }
}

impl PackConfig {
    pub fn validate(&self) -> Result<(), PackingError> {
        if self.context_len == 0 {
            return Err(PackingError::InvalidConfig("context length must be positive".into()));
        }
        if self.shard_size == 0 {
            return Err(PackingError::InvalidConfig("shard size must be positive".into()));
        }
        if self.eos_id == self.pad_id {
            return Err(PackingError::InvalidConfig(format!("eos and pad share id {}", self.eos_id)));
        }
        Ok(())
    }
}

/// A tokenized document ready for packing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub lang: String,
    pub tokens: Vec<u32>,
}

/// The part of one document (including its eos, if it lands here) inside a
/// sequence: `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub doc_id: String,
    pub lang: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedSequence {
    pub tokens: Vec<u32>,
    pub spans: Vec<Span>,
    pub pad_count: usize,
}

impl PackedSequence {
    pub fn non_pad_tokens(&self) -> usize {
        self.tokens.len() - self.pad_count
    }
}

/// Streaming packer. Feed documents with [`Packer::push`], then call
/// [`Packer::finish`] for the padded tail.
#[derive(Debug)]
pub struct Packer {
    config: PackConfig,
    tokens: Vec<u32>,
    spans: Vec<Span>,
}

impl Packer {
    pub fn new(config: PackConfig) -> Result<Self, PackingError> {
        config.validate()?;
        let tokens = Vec::with_capacity(config.context_len);
        Ok(Self { config, tokens, spans: Vec::new() })
    }

    /// Appends one document and returns every sequence it completed.
    pub fn push(&mut self, doc: &TokenizedDoc) -> Result<Vec<PackedSequence>, PackingError> {
        check_pad(doc, self.config.pad_id)?;
        let l = self.config.context_len;
        let mut done = Vec::new();
        let mut remaining = doc.tokens.as_slice();
        let mut eos_pending = true;
        while !remaining.is_empty() || eos_pending {
            let start = self.tokens.len();
            let room = l - start;
            let take = remaining.len().min(room);
            self.tokens.extend_from_slice(&remaining[..take]);
            remaining = &remaining[take..];
            if remaining.is_empty() && self.tokens.len() < l {
                self.tokens.push(self.config.eos_id);
                eos_pending = false;
            }
            self.spans.push(Span { start, end: self.tokens.len(), doc_id: doc.doc_id.clone(), lang: doc.lang.clone() });
            if self.tokens.len() == l {
                done.push(PackedSequence {
                    tokens: std::mem::replace(&mut self.tokens, Vec::with_capacity(l)),
                    spans: std::mem::take(&mut self.spans),
                    pad_count: 0,
                });
            }
        }
        Ok(done)
    }

    pub fn finish(mut self) -> Option<PackedSequence> {
        if self.tokens.is_empty() {
            return None;
        }
        let pad_count = self.config.context_len - self.tokens.len();
        self.tokens.resize(self.config.context_len, self.config.pad_id);
        Some(PackedSequence { tokens: self.tokens, spans: self.spans, pad_count })
    }
}

fn check_pad(doc: &TokenizedDoc, pad_id: u32) -> Result<(), PackingError> {
    if doc.tokens.contains(&pad_id) {
        return Err(PackingError::PadCollision { doc_id: doc.doc_id.clone(), pad_id });
    }
    Ok(())
}

/// Packs a whole stream on the calling thread.
pub fn pack(docs: &[TokenizedDoc], config: &PackConfig) -> Result<Vec<PackedSequence>, PackingError> {
    let mut packer = Packer::new(config.clone())?;
    let mut out = Vec::new();
    for doc in docs {
        out.extend(packer.push(doc)?);
    }
    out.extend(packer.finish());
    Ok(out)
}

/// Packs with `workers` threads. Document offsets come from a prefix sum
/// over `len + 1`, after which every sequence is built independently. The
/// output is identical to [`pack`].
pub fn pack_parallel(docs: &[TokenizedDoc], config: &PackConfig, workers: usize) -> Result<Vec<PackedSequence>, PackingError> {
    if workers == 1 {
        return pack(docs, config);
    }
    config.validate()?;
    for result in parallel::map(docs, workers, |doc| check_pad(doc, config.pad_id)) {
        result?;
    }
    // starts[i] is the stream offset of document i; the last entry is the total.
    let mut starts = Vec::with_capacity(docs.len() + 1);
    let mut offset = 0usize;
    starts.push(0);
    for doc in docs {
        offset += doc.tokens.len() + 1;
        starts.push(offset);
    }
    let total = offset;
    let l = config.context_len;
    let n_seq = total.div_ceil(l);
    Ok(parallel::map_range(n_seq, workers, |i| build_sequence(docs, &starts, i * l, ((i + 1) * l).min(total), config)))
}

fn build_sequence(docs: &[TokenizedDoc], starts: &[usize], lo: usize, hi: usize, config: &PackConfig) -> PackedSequence {
    let l = config.context_len;
    let mut tokens = Vec::with_capacity(l);
    let mut spans = Vec::new();
    // First document whose extent [start, next_start) reaches past `lo`.
    let mut d = starts.partition_point(|&s| s <= lo) - 1;
    while d < docs.len() && starts[d] < hi {
        let doc = &docs[d];
        let doc_lo = starts[d].max(lo);
        let doc_hi = starts[d + 1].min(hi);
        let span_start = tokens.len();
        let body_end = starts[d] + doc.tokens.len();
        if doc_lo < body_end {
            tokens.extend_from_slice(&doc.tokens[doc_lo - starts[d]..body_end.min(doc_hi) - starts[d]]);
        }
        if doc_hi > body_end {
            tokens.push(config.eos_id);
        }
        spans.push(Span { start: span_start, end: tokens.len(), doc_id: doc.doc_id.clone(), lang: doc.lang.clone() });
        d += 1;
    }
    let pad_count = l - tokens.len();
    tokens.resize(l, config.pad_id);
    PackedSequence { tokens, spans, pad_count }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, len: u32) -> TokenizedDoc {
        TokenizedDoc { doc_id: id.into(), lang: "yor_Latn".into(), tokens: (1..=len).collect() }
    }

    fn config(l: usize) -> PackConfig {
        PackConfig { context_len: l, eos_id: 100, pad_id: 101, shard_size: 4, seed: 0 }
    }

    #[test]
    fn carry_over() {
        let seqs = pack(&[doc("a", 5), doc("b", 4)], &config(8)).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].tokens, vec![1, 2, 3, 4, 5, 100, 1, 2]);
        assert_eq!(seqs[0].pad_count, 0);
        assert_eq!(seqs[1].tokens, vec![3, 4, 100, 101, 101, 101, 101, 101]);
        assert_eq!(seqs[1].pad_count, 5);
        let non_pad: usize = seqs.iter().map(PackedSequence::non_pad_tokens).sum();
        assert_eq!(non_pad, 11);
        let spans: Vec<(usize, usize, &str)> =
            seqs.iter().flat_map(|s| s.spans.iter().map(|x| (x.start, x.end, x.doc_id.as_str()))).collect();
        assert_eq!(spans, vec![(0, 6, "a"), (6, 8, "b"), (0, 3, "b")]);
        assert_eq!(pack_parallel(&[doc("a", 5), doc("b", 4)], &config(8), 3).unwrap(), seqs);
    }

    #[test]
    fn eos_alone_at_sequence_start() {
        let docs = [doc("a", 8), doc("b", 0)];
        let seqs = pack(&docs, &config(8)).unwrap();
        assert_eq!(seqs[1].tokens[..2], [100, 100]);
        assert_eq!(seqs[1].spans.len(), 2);
        assert_eq!(pack_parallel(&docs, &config(8), 2).unwrap(), seqs);
    }

    #[test]
    fn empty_stream_and_errors() {
        assert!(pack(&[], &config(8)).unwrap().is_empty());
        assert!(pack_parallel(&[], &config(8), 4).unwrap().is_empty());
        let bad = TokenizedDoc { doc_id: "x".into(), lang: "yor_Latn".into(), tokens: vec![101] };
        assert!(matches!(pack(std::slice::from_ref(&bad), &config(8)), Err(PackingError::PadCollision { .. })));
        assert!(matches!(pack_parallel(&[bad], &config(8), 2), Err(PackingError::PadCollision { .. })));
        let mut c = config(8);
        c.pad_id = c.eos_id;
        assert!(pack(&[], &c).is_err());
    }

    #[test]
    fn exact_fill_has_no_padding_sequence() {
        let seqs = pack(&[doc("a", 7)], &config(8)).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].pad_count, 0);
    }
}
