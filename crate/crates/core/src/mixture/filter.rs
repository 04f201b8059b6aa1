use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MixtureError;
use crate::ingest::Tokenizer;
use crate::parallel;
use crate::registry::LanguageCode;

/// Default retention threshold on the QE score.
pub const DEFAULT_TAU: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub id: String,
    pub src_lang: LanguageCode,
    pub tgt_lang: LanguageCode,
    pub src_text: String,
    pub tgt_text: String,
    /// `None` means unscored.
    #[serde(default)]
    pub qe_score: Option<f64>,
}

impl ParallelPair {
    pub fn validate(&self) -> Result<(), MixtureError> {
        if self.src_lang == self.tgt_lang {
            return Err(MixtureError::InvalidPair { id: self.id.clone(), reason: "source and target language are equal".into() });
        }
        Ok(())
    }
}

/// Reference-free quality estimator for translation pairs.
pub trait QeScorer: Sync {
    fn score(&self, pair: &ParallelPair) -> Result<f64, String>;
}

/// Uses the score already attached to each pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrecomputedScorer;

impl QeScorer for PrecomputedScorer {
    fn score(&self, pair: &ParallelPair) -> Result<f64, String> {
        pair.qe_score.ok_or_else(|| "pair is unscored".to_owned())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl QeScorer for ConstantScorer {
    fn score(&self, _: &ParallelPair) -> Result<f64, String> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input_pairs: u64,
    pub retained_pairs: u64,
    /// Source plus target tokens.
    pub input_tokens: u64,
    pub retained_tokens: u64,
}

impl std::ops::AddAssign for FilterStats {
    fn add_assign(&mut self, rhs: Self) {
        self.input_pairs += rhs.input_pairs;
        self.retained_pairs += rhs.retained_pairs;
        self.input_tokens += rhs.input_tokens;
        self.retained_tokens += rhs.retained_tokens;
    }
}

/// Keeps pairs scoring at least `tau`. Scores are computed in parallel and
/// applied in input order; any scorer failure aborts the whole call.
pub fn filter_parallel(
    pairs: &[ParallelPair],
    scorer: &dyn QeScorer,
    tau: f64,
    tokenizer: &Tokenizer,
    workers: usize,
) -> Result<(Vec<ParallelPair>, FilterStats), MixtureError> {
    let mut retained = Vec::new();
    let stats = filter_batch(pairs, scorer, tau, tokenizer, workers, &mut |p: &ParallelPair| retained.push(p.clone()))?;
    Ok((retained, stats))
}

/// Streaming variant: scores `batch_size` pairs at a time and hands retained
/// pairs to `sink` in input order.
pub fn filter_parallel_stream<I>(
    pairs: I,
    scorer: &dyn QeScorer,
    tau: f64,
    tokenizer: &Tokenizer,
    workers: usize,
    batch_size: usize,
    mut sink: impl FnMut(&ParallelPair),
) -> Result<FilterStats, MixtureError>
where
    I: IntoIterator<Item = Result<ParallelPair, MixtureError>>,
{
    let mut stats = FilterStats::default();
    let mut iter = pairs.into_iter();
    let mut batch = Vec::with_capacity(batch_size.max(1));
    loop {
        batch.clear();
        for pair in iter.by_ref().take(batch_size.max(1)) {
            batch.push(pair?);
        }
        if batch.is_empty() {
            return Ok(stats);
        }
        stats += filter_batch(&batch, scorer, tau, tokenizer, workers, &mut sink)?;
    }
}

fn filter_batch(
    pairs: &[ParallelPair],
    scorer: &dyn QeScorer,
    tau: f64,
    tokenizer: &Tokenizer,
    workers: usize,
    sink: &mut dyn FnMut(&ParallelPair),
) -> Result<FilterStats, MixtureError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(MixtureError::InvalidTau(tau));
    }
    let scored = parallel::map(pairs, workers, |pair| {
        pair.validate()?;
        let failure = |reason: String| MixtureError::ScorerFailure { id: pair.id.clone(), reason };
        let score = scorer.score(pair).map_err(failure)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(failure(format!("score {score} is outside [0, 1]")));
        }
        let tokens = tokenizer.count(&pair.src_text)? + tokenizer.count(&pair.tgt_text)?;
        Ok((score >= tau, tokens))
    });
    let mut stats = FilterStats::default();
    for (pair, result) in pairs.iter().zip(scored) {
        let (keep, tokens) = result?;
        stats.input_pairs += 1;
        stats.input_tokens += tokens;
        if keep {
            stats.retained_pairs += 1;
            stats.retained_tokens += tokens;
            sink(pair);
        }
    }
    Ok(stats)
}

/// Reads pairs from JSON lines with keys `id, src_lang, tgt_lang, src_text,
/// tgt_text` and optional `qe_score`.
pub fn read_pairs(path: &Path) -> Result<Vec<ParallelPair>, MixtureError> {
    let read_err = |reason: String| MixtureError::Read { path: path.display().to_string(), reason };
    let file = std::fs::File::open(path).map_err(|e| read_err(e.to_string()))?;
    let mut pairs = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| read_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: ParallelPair = serde_json::from_str(&line).map_err(|e| read_err(format!("line {}: {e}", i + 1)))?;
        pair.validate()?;
        pairs.push(pair);
    }
    Ok(pairs)
}
