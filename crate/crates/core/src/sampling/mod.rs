//! Language selection, UniMax budget allocation and per-epoch document
//! scheduling.

mod schedule;
mod unimax;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CorpusStats;
use crate::registry::{LanguageCode, Registry, DEFAULT_SELECTION_THRESHOLD};

pub use schedule::{parse_doc_index, schedule_documents, shuffle_order, DocIndex, LanguageSchedule, ScheduleSpec, ScheduledDoc};
pub use unimax::{unimax_allocate, PlanEntry, SamplingPlan};

/// Default maximum number of passes over a language's raw data.
pub const DEFAULT_EPOCH_CAP: u64 = 4;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("no languages to allocate")]
    EmptyInput,
    #[error("language {0} has a zero raw count")]
    ZeroCount(LanguageCode),
    #[error("budget {budget} exceeds total capacity {capacity}")]
    Infeasible { budget: u64, capacity: u128 },
    #[error("document index for {lang} sums to {indexed} tokens but the plan has raw total {raw_total}")]
    InconsistentIndex { lang: LanguageCode, indexed: u64, raw_total: u64 },
    #[error("malformed plan table: {0}")]
    MalformedTable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub budget_n: u64,
    pub epoch_cap: u64,
    pub selection_threshold: u64,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(budget_n: u64) -> Self {
        Self { budget_n, epoch_cap: DEFAULT_EPOCH_CAP, selection_threshold: DEFAULT_SELECTION_THRESHOLD, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.budget_n == 0 {
            return Err(SamplingError::InvalidConfig("budget_N must be positive".into()));
        }
        if self.epoch_cap == 0 {
            return Err(SamplingError::InvalidConfig("epoch cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Languages split by the selection threshold, each list sorted by
/// descending raw total (ties by code).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Selection {
    pub included: Vec<(LanguageCode, u64)>,
    pub excluded: Vec<(LanguageCode, u64)>,
}

impl Selection {
    pub fn included_totals(&self) -> BTreeMap<LanguageCode, u64> {
        self.included.iter().cloned().collect()
    }
}

/// Keeps languages whose raw total is at least `threshold`.
pub fn select_languages(totals: impl IntoIterator<Item = (LanguageCode, u64)>, threshold: u64) -> Selection {
    let (mut included, mut excluded): (Vec<_>, Vec<_>) = totals.into_iter().partition(|(_, raw)| *raw >= threshold);
    let by_size = |a: &(LanguageCode, u64), b: &(LanguageCode, u64)| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0));
    included.sort_by(by_size);
    excluded.sort_by(by_size);
    Selection { included, excluded }
}

pub fn select_from_registry(registry: &Registry, threshold: u64) -> Selection {
    select_languages(registry.raw_totals(), threshold)
}

pub fn select_from_stats(stats: &CorpusStats, threshold: u64) -> Selection {
    select_languages(stats.totals_by_lang().into_iter().map(|(lang, c)| (lang, c.tokens)), threshold)
}
