//! Character and word n-gram F-scores.
//!
//! For every order the clipped match count, hypothesis count and reference
//! count are collected. Orders where both counts are zero are skipped;
//! precision and recall are averaged over the remaining orders and combined
//! into one F-beta score. Two empty strings score 100.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChrfConfig {
    pub char_order: usize,
    /// 0 for chrF, 2 for chrF++.
    pub word_order: usize,
    pub beta: f64,
    pub whitespace_in_char_ngrams: bool,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        Self::chrf_plus_plus()
    }
}

impl ChrfConfig {
    pub fn chrf() -> Self {
        Self { char_order: 6, word_order: 0, beta: 2.0, whitespace_in_char_ngrams: false }
    }

    pub fn chrf_plus_plus() -> Self {
        Self { word_order: 2, ..Self::chrf() }
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.char_order == 0 {
            return Err(MetricsError::InvalidConfig("char_order must be at least 1".into()));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(MetricsError::InvalidConfig("beta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderStats {
    pub hyp: u64,
    pub reference: u64,
    pub matches: u64,
}

/// Sufficient statistics: char orders first, then word orders.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChrfStats {
    pub orders: Vec<OrderStats>,
}

impl ChrfStats {
    pub fn zeros(config: &ChrfConfig) -> Self {
        Self { orders: vec![OrderStats::default(); config.char_order + config.word_order] }
    }

    pub fn add(&mut self, other: &ChrfStats) {
        if self.orders.len() < other.orders.len() {
            self.orders.resize(other.orders.len(), OrderStats::default());
        }
        for (a, b) in self.orders.iter_mut().zip(&other.orders) {
            a.hyp += b.hyp;
            a.reference += b.reference;
            a.matches += b.matches;
        }
    }

    /// F-beta over the averaged precision and recall, scaled to [0, 100].
    pub fn score(&self, beta: f64) -> f64 {
        let (mut p, mut r, mut n) = (0.0, 0.0, 0usize);
        for o in self.orders.iter().filter(|o| o.hyp + o.reference > 0) {
            if o.hyp > 0 {
                p += o.matches as f64 / o.hyp as f64;
            }
            if o.reference > 0 {
                r += o.matches as f64 / o.reference as f64;
            }
            n += 1;
        }
        if n == 0 {
            return 100.0;
        }
        let (p, r) = (p / n as f64, r / n as f64);
        let b2 = beta * beta;
        let denom = b2 * p + r;
        if denom == 0.0 {
            return 0.0;
        }
        100.0 * ((1.0 + b2) * p * r / denom).min(1.0)
    }
}

fn ngram_counts<T: Eq + Hash>(items: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if items.len() >= n {
        for gram in items.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn order_stats<T: Eq + Hash>(hyp: &[T], reference: &[T], n: usize) -> OrderStats {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matches = h.iter().map(|(gram, &c)| c.min(r.get(gram).copied().unwrap_or(0))).sum();
    OrderStats { hyp: h.values().sum(), reference: r.values().sum(), matches }
}

fn char_stream(text: &str, keep_whitespace: bool) -> Vec<char> {
    text.chars().filter(|c| keep_whitespace || !c.is_whitespace()).collect()
}

pub fn chrf_stats(hyp: &str, reference: &str, config: &ChrfConfig) -> ChrfStats {
    let hc = char_stream(hyp, config.whitespace_in_char_ngrams);
    let rc = char_stream(reference, config.whitespace_in_char_ngrams);
    let mut orders: Vec<OrderStats> = (1..=config.char_order).map(|n| order_stats(&hc, &rc, n)).collect();
    if config.word_order > 0 {
        let hw: Vec<&str> = hyp.split_whitespace().collect();
        let rw: Vec<&str> = reference.split_whitespace().collect();
        orders.extend((1..=config.word_order).map(|n| order_stats(&hw, &rw, n)));
    }
    ChrfStats { orders }
}

/// Sentence-level chrF (or chrF++ when `word_order > 0`).
pub fn chrf(hyp: &str, reference: &str, config: &ChrfConfig) -> Result<f64, MetricsError> {
    config.validate()?;
    Ok(chrf_stats(hyp, reference, config).score(config.beta))
}

/// Joins consecutive groups of `k` sentences with a single space; the last
/// group holds the remainder.
pub fn make_pseudo_docs<S: AsRef<str>>(sentences: &[S], k: usize) -> Result<Vec<String>, MetricsError> {
    if k == 0 {
        return Err(MetricsError::InvalidGroupSize);
    }
    Ok(sentences.chunks(k).map(|group| group.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")).collect())
}

/// Document-level chrF: statistics of all aligned pseudo-documents are
/// summed before a single F-score is taken.
pub fn dchrf<S: AsRef<str> + Sync>(
    hyp_sents: &[S],
    ref_sents: &[S],
    k: usize,
    config: &ChrfConfig,
    workers: usize,
) -> Result<f64, MetricsError> {
    config.validate()?;
    if hyp_sents.len() != ref_sents.len() {
        return Err(MetricsError::LengthMismatch { hyp: hyp_sents.len(), reference: ref_sents.len() });
    }
    let hyp_docs = make_pseudo_docs(hyp_sents, k)?;
    let ref_docs = make_pseudo_docs(ref_sents, k)?;
    let pairs: Vec<(&String, &String)> = hyp_docs.iter().zip(&ref_docs).collect();
    let per_doc = parallel::map(&pairs, workers, |(h, r)| chrf_stats(h, r, config));
    let mut total = ChrfStats::zeros(config);
    for stats in &per_doc {
        total.add(stats);
    }
    Ok(total.score(config.beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(char_order: usize, word_order: usize) -> ChrfConfig {
        ChrfConfig { char_order, word_order, beta: 2.0, whitespace_in_char_ngrams: false }
    }

    #[test]
    fn identity_and_disjoint() {
        assert_eq!(chrf("abc", "abc", &ChrfConfig::chrf()).unwrap(), 100.0);
        assert_eq!(chrf("ab", "cd", &ChrfConfig::chrf()).unwrap(), 0.0);
        assert_eq!(chrf("", "", &ChrfConfig::default()).unwrap(), 100.0);
        assert_eq!(chrf("", "abc", &ChrfConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn hand_derived_unigram_case() {
        let got = chrf("aab", "ab", &cfg(1, 0)).unwrap();
        assert!((got - 1000.0 / 11.0).abs() < 1e-9);
    }

    #[test]
    fn whitespace_is_stripped_from_char_stream() {
        assert_eq!(chrf("a b", "ab", &cfg(2, 0)).unwrap(), 100.0);
        let with_ws = ChrfConfig { whitespace_in_char_ngrams: true, ..cfg(2, 0) };
        assert!(chrf("a b", "ab", &with_ws).unwrap() < 100.0);
    }

    #[test]
    fn word_orders_use_whitespace_tokens() {
        let stats = chrf_stats("the cat sat", "the cat", &cfg(6, 2));
        assert_eq!(stats.orders.len(), 8);
        assert_eq!(stats.orders[6], OrderStats { hyp: 3, reference: 2, matches: 2 });
        assert_eq!(stats.orders[7], OrderStats { hyp: 2, reference: 1, matches: 1 });
    }

    #[test]
    fn pseudo_doc_grouping() {
        let sents: Vec<String> = (0..23).map(|i| format!("s{i}")).collect();
        let docs = make_pseudo_docs(&sents, 10).unwrap();
        let sizes: Vec<usize> = docs.iter().map(|d| d.split(' ').count()).collect();
        assert_eq!(sizes, vec![10, 10, 3]);
        assert_eq!(make_pseudo_docs(&sents, 1).unwrap(), sents);
        assert!(make_pseudo_docs(&sents, 0).is_err());
    }

    #[test]
    fn dchrf_cases() {
        let h = ["a b", "c d", "e"];
        assert_eq!(dchrf(&h, &h, 2, &ChrfConfig::default(), 1).unwrap(), 100.0);
        let r = ["a x", "c d", "f"];
        let whole = chrf(&h.join(" "), &r.join(" "), &ChrfConfig::default()).unwrap();
        assert!((dchrf(&h, &r, 10, &ChrfConfig::default(), 1).unwrap() - whole).abs() < 1e-12);
        assert!(matches!(dchrf(&h, &r[..2], 2, &ChrfConfig::default(), 1), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn invalid_config() {
        assert!(chrf("a", "a", &cfg(0, 0)).is_err());
        assert!(chrf("a", "a", &ChrfConfig { beta: 0.0, ..cfg(1, 0) }).is_err());
    }
}
